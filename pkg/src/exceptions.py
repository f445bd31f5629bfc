"""
Custom exceptions for the grammar-based document listing index
"""


class GramDocError(Exception):
    """Base exception for the index library"""
    pass


class QueryRangeError(GramDocError, IndexError):
    """Exception raised when a position or range is outside a structure"""
    pass


class DomainError(GramDocError, ValueError):
    """Exception raised when a value falls outside its declared domain"""
    pass


class ConsistencyError(GramDocError):
    """Exception raised when auxiliary data disagrees with what it describes"""
    pass


class BuildError(GramDocError):
    """Exception raised when build input is invalid"""
    pass


class GrammarError(BuildError):
    """Exception raised when a grammar is cyclic or not in normal form"""
    pass


class ScriptError(BuildError):
    """Exception raised when an edit script cannot be applied"""
    pass


class IntegrityError(GramDocError):
    """Exception raised when stored list boundaries disagree with the lists"""
    pass


class CollectionError(GramDocError):
    """Exception raised when a collection cannot be read or parsed"""
    pass


class ConfigurationError(GramDocError):
    """Exception raised when configuration is invalid"""
    pass


class StorageError(GramDocError):
    """Exception raised when a container operation fails"""
    pass


class ContainerNotFoundError(StorageError):
    """Exception raised when an index container does not exist"""
    pass


class CorruptContainerError(StorageError):
    """Exception raised when a container fails magic, version or checksum checks"""
    pass
