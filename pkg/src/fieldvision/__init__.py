"""Soccer-robot vision: camera geometry, detectors, localization, calibration and a synthetic benchmark."""

__version__ = "0.1.0"
