class AssumptionViolated(ValueError):
    """モデルやチルトが定理の仮定を満たしていない。"""


class UndefinedTiltError(ValueError):
    """チルトされた分布そのものが存在しない (θ が MGF の収束半径を超えている)。"""


class IngestionError(ValueError):
    """CSV の読み込みに失敗した。row は 1 始まりのデータ行番号。"""
    def __init__(self, message: str, row: int=None):
        super().__init__(message)
        self.row = row


class FactorizationError(RuntimeError):
    """ジッターを加えても共分散行列を分解できなかった。"""


class BudgetExceeded(ValueError):
    """グリッド評価数が上限を超えた。"""
