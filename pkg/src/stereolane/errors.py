"""Exception types shared across the pipeline."""


class StereoLaneError(Exception):
    """Base class for every error raised by this package."""


class RankDeficientError(StereoLaneError, ValueError):
    """Least-squares design matrix does not have full column rank."""


class SingularProfileError(StereoLaneError, ValueError):
    """V_py is undefined because the road-profile slope vanishes."""


class RansacError(StereoLaneError, ValueError):
    """Too few points to run the robust fit at all."""


class StageError(StereoLaneError):
    """A pipeline stage failed; ``stage`` is its 1-based stage number."""

    def __init__(self, stage: int, name: str, message: str):
        self.stage = stage
        self.name = name
        super().__init__(f"stage {stage} ({name}): {message}")


class RoadProfileError(StageError):
    pass


class VanishingPointError(StageError):
    pass
