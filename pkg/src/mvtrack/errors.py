"""Exception hierarchy shared by all pipeline stages."""


class MVTrackError(Exception):
    """Base class for every error raised by mvtrack."""


class GeometryError(MVTrackError):
    pass


class DegenerateRig(GeometryError):
    """Two cameras share a center, so their epipole is undefined."""


class NullLine(GeometryError):
    """An epipolar line collapsed to the zero vector."""


class DegenerateBox(GeometryError):
    """A bounding box with w + h == 0 cannot normalize a distance."""


class NoCommonJoints(GeometryError):
    pass


class DegenerateBaseline(GeometryError):
    """The triangulation system has no unique null vector."""


class InfinitePoint(GeometryError):
    """The triangulated homogeneous point lies at infinity."""


class BehindCamera(GeometryError):
    pass


class FrameRegression(MVTrackError):
    """A single-view tracker was fed a frame it has already processed."""


class EmptyFrame(MVTrackError):
    """Fewer than two cameras contribute to a frame of a cluster."""

    def __init__(self, frame, n_cameras=0):
        super().__init__(f"frame {frame}: {n_cameras} contributing camera(s), need 2")
        self.frame = frame
        self.n_cameras = n_cameras


class EmptyTracklet(MVTrackError):
    """No frame of a cluster produced a 3D position."""


class OutOfOrderWindow(MVTrackError):
    pass


class ParseError(MVTrackError):
    def __init__(self, message, line=None, path=None):
        where = f"{path}:" if path else ""
        where += f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.path = path


class SchemaMismatch(ParseError):
    pass


class ConfigError(MVTrackError):
    pass
