"""Multi-camera multi-person 3D tracking from 2D detections."""

__version__ = "0.1.0"

from .assoc import ClusterSet, TrackletDistance, associate, distance_matrix, pdnc, tracklet_distance
from .cmmt import Tracklet3D, cmmt, interpolate_tracklet
from .config import PipelineConfig, load_config
from .errors import *  # noqa: F401,F403
from .geometry import CameraModel, FundamentalPair, Observation2D, Rig
from .io import load_calibration, load_detections, load_tracks, write_tracks
from .linker import Linker, assign
from .metrics import MotReport, clear_mot, identity_f1, pcp
from .pipeline import PipelineResult, run_pipeline
from .svtrack import SingleViewTracker, Tracklet2D
from .windows import WindowConfig

__all__ = [
    "CameraModel", "ClusterSet", "FundamentalPair", "Linker", "MotReport", "Observation2D",
    "PipelineConfig", "PipelineResult", "Rig", "SingleViewTracker", "Tracklet2D", "Tracklet3D",
    "TrackletDistance", "WindowConfig", "assign", "associate", "clear_mot", "cmmt", "distance_matrix",
    "identity_f1", "interpolate_tracklet", "load_calibration", "load_config", "load_detections",
    "load_tracks", "pcp", "pdnc", "run_pipeline", "tracklet_distance", "write_tracks",
]
