"""
例外定義モジュール

設定エラーと数値エラーを区別し、CLIの終了コードに対応付ける
"""


class PickFreezeError(Exception):
    """全ての独自例外の基底クラス"""


class ConfigError(PickFreezeError, ValueError):
    """設定ファイルやコマンドライン引数の不備"""


class ParameterError(PickFreezeError, ValueError):
    """分布パラメータや閾値などの引数が範囲外"""


class DesignError(PickFreezeError, ValueError):
    """部分集合の指定やサンプルと計画の不整合"""


class NumericalError(PickFreezeError, ArithmeticError):
    """数値計算上の失敗（終了コード3）"""


class DegenerateOutputError(NumericalError):
    """出力の経験分散が実質ゼロ"""


class DomainError(NumericalError):
    """関数の定義域外での評価"""


class BoundaryError(NumericalError):
    """上界が不連続になる境界点での評価"""
