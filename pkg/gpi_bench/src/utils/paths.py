import os
from pathlib import Path
from typing import Union


def check_directory_access(path: Union[str, Path], require_write: bool = False) -> bool:
    """
    Checks if a directory exists and has the required permissions.

    Args:
        path: Directory path to check
        require_write: If True, checks for write permissions as well

    Returns:
        bool: True if directory is accessible with required permissions
    """
    path_obj = Path(path)
    if not path_obj.is_dir():
        return False
    if not os.access(path_obj, os.R_OK):
        return False
    if require_write and not os.access(path_obj, os.W_OK):
        return False
    return True


def prepare_output_directory(path: Union[str, Path]) -> Path:
    """Create the output directory if needed and make sure results can be written there."""
    output = Path(path)
    try:
        output.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise PermissionError(f"Cannot create output directory {output}: {e}")
    if not check_directory_access(output, require_write=True):
        raise PermissionError(f"No write permission for output directory {output}")
    return output
