"""Exception types shared across the toolkit."""


class ComanipError(Exception):
    """Base class for all toolkit errors."""


class SceneSpecError(ComanipError):
    """Scene description references an unknown template or is malformed."""


class EmptyCloudError(ComanipError):
    """A label matched no pixels in any view."""


class NoGraspableRegionError(ComanipError):
    """Collision filtering removed every point of the object cloud."""


class ClusterCountError(ComanipError):
    """Fewer collision-free points than requested clusters."""


class LabelOverlapError(ComanipError):
    """Two projected labels fall within the minimum pixel distance."""

    def __init__(self, pairs):
        self.pairs = list(pairs)
        names = ", ".join(f"{a}/{b}" for a, b in self.pairs)
        super().__init__(f"label projections overlap: {names}")


class NoLocalGraspError(ComanipError):
    """No antipodal contact pair found near the reference point."""


class DegenerateGraspError(ComanipError):
    """Grasp matrix cannot balance the requested wrench (rank deficiency)."""

    def __init__(self, msg, min_eigenvalue=None, residual=None):
        super().__init__(msg)
        self.min_eigenvalue = min_eigenvalue
        self.residual = residual


class EquilibriumInfeasibleError(ComanipError):
    """Friction cones admit no force set balancing the external wrench."""

    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class UnreachableError(ComanipError):
    """Inverse kinematics failed to reach the target."""

    def __init__(self, msg, best_position_error, best_rotation_error):
        super().__init__(msg)
        self.best_position_error = best_position_error
        self.best_rotation_error = best_rotation_error


class InsufficientRobotsError(ComanipError):
    """Task needs more robots than the budget allows."""


class SubsetBudgetError(ComanipError):
    """Exhaustive coalition search would exceed the subset limit."""


class AdvisorError(ComanipError):
    """Base for advisor transport/parse/validation failures."""


class AdvisorTransportError(AdvisorError):
    pass


class AdvisorParseError(AdvisorError):
    pass


class AdvisorValidationError(AdvisorError):
    pass


class PlanningError(ComanipError):
    """Base for motion-planning failures."""


class StageOneInfeasibleError(PlanningError):
    """Per-robot path to the grasp configuration not found."""

    def __init__(self, msg, robot_index):
        super().__init__(msg)
        self.robot_index = robot_index


class StageTwoInfeasibleError(PlanningError):
    """Object-trajectory replanning budget exhausted."""

    def __init__(self, msg, blocked_poses=None):
        super().__init__(msg)
        self.blocked_poses = blocked_poses
