class IpdtsimWarning(UserWarning):
    pass


class LowPhaseMarginWarning(IpdtsimWarning):
    pass


class DeadTimeClampedWarning(IpdtsimWarning):
    pass


class UnsettledResponseWarning(IpdtsimWarning):
    pass
