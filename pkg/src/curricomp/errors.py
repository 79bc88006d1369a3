class CurricompError(Exception):
    pass


class ConfigError(CurricompError, ValueError):
    pass


class NumericError(CurricompError, ArithmeticError):
    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


class IngestionError(CurricompError):
    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class SynthesisError(CurricompError):
    pass


class PoolError(CurricompError):
    pass


class DivergenceError(NumericError):
    def __init__(self, message, epoch=None, batch=None):
        super().__init__(f"epoch {epoch}, batch {batch}: {message}")
        self.epoch = epoch
        self.batch = batch
