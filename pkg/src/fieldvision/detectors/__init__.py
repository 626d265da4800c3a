"""Object detection on distorted camera frames."""

from .ball import (
    BallClassifier,
    ClassifierFormatError,
    PatchShapeError,
    TrainingFailure,
    TrainingReport,
    augment_positive,
    ball_center_from_pixel,
    classify_ball,
    detect_ball_candidates,
    expected_radius,
    extract_patch,
    load_classifier,
    prepare_positives,
    reference_histograms,
    save_classifier,
    train_ball_classifier,
)
from .boundary import detect_field_boundary, mask_iou, naive_field_boundary
from .lines import (
    CircleDetection,
    Verification,
    detect_centre_circle,
    detect_lines,
    merge_pixel_segments,
    merge_segments,
    merge_segments_passes,
    segment_pixels_to_ego,
    verify_segment,
)
from .pipeline import BallModel, detect_ball, detect_frame
from .posts import detect_goal_posts
from .types import BallCandidate, DetectorConfig, Detections, FieldBoundary, NoFieldError
