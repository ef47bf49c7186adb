"""Exception types shared across the package."""


class MymError(Exception):
    """Base class for every domain error raised by this package."""


# ontology
class UnknownParent(MymError, LookupError):
    pass


class DuplicateSiblingLabel(MymError, ValueError):
    pass


class UnknownConcept(MymError, LookupError):
    pass


class ParseError(MymError, ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class CycleOrOrphan(MymError, ValueError):
    pass


# matchmaking
class DomainError(MymError, ValueError):
    pass


# socialgraph
class AlreadyIncarnated(MymError, ValueError):
    pass


class SelfFriendship(MymError, ValueError):
    pass


class UnknownProsumer(MymError, LookupError):
    pass


class UnknownContent(MymError, LookupError):
    pass


class UnknownGroup(MymError, LookupError):
    pass


class UnknownTarget(MymError, LookupError):
    pass


class DuplicateEdge(MymError, ValueError):
    pass


class BodyTooLarge(MymError, ValueError):
    pass


class BadParent(MymError, ValueError):
    pass


class DuplicateGroupName(MymError, ValueError):
    pass


class AlreadyMember(MymError, ValueError):
    pass


class NotSuperProsumer(MymError, PermissionError):
    pass


class BannedProsumer(MymError, PermissionError):
    pass


class ReplayError(MymError, ValueError):
    pass


# contentstore
class EntryTooLarge(MymError, ValueError):
    pass


class NotFound(MymError, LookupError):
    pass


# protocol
class DecodeError(MymError, ValueError):
    pass


class UnknownKind(MymError, ValueError):
    pass


class PayloadTooLarge(MymError, ValueError):
    pass


class EmptyMessage(MymError, ValueError):
    pass


class EmptyInterests(MymError, ValueError):
    pass


# netsim
class ConfigError(MymError, ValueError):
    pass


class UnknownNode(MymError, LookupError):
    pass
