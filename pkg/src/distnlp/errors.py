"""Exception hierarchy shared by the store, engine and harness."""


class DistNLPError(Exception):
    pass


class CorpusDecodeError(DistNLPError, ValueError):
    """Input bytes are not valid UTF-8."""

    def __init__(self, offset, source=None, reason="invalid UTF-8"):
        self.offset = offset
        self.source = source
        where = f"{source}: " if source else ""
        super().__init__(f"{where}{reason} at byte offset {offset}")


class StoreError(DistNLPError, OSError):
    pass


class FileExistsInStore(StoreError):
    pass


class FileNotInStore(StoreError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class BlockUnavailableError(StoreError):
    def __init__(self, block_id, placements):
        self.block_id = block_id
        self.placements = list(placements)
        super().__init__(
            f"block {block_id} unavailable: all replicas on failed nodes {self.placements}"
        )


class ConfigurationError(DistNLPError, ValueError):
    pass


class OutputExistsError(DistNLPError, FileExistsError):
    pass


class JobFailedError(DistNLPError, RuntimeError):
    pass


class DeterminismError(DistNLPError, RuntimeError):
    pass
