import os
from typing import List, Optional, Sequence

from eyeaffect.errors import ArgumentError, FormatError

ALLOWED_EXTENSIONS = {'csv'}


def allowed_file(filename: str, extensions: Sequence[str] = tuple(ALLOWED_EXTENSIONS)) -> bool:
    return '.' in filename and \
           filename.rsplit('.', 1)[1].lower() in extensions


def validate_corpus_dir(root: str) -> None:
    if not os.path.isdir(root):
        raise FormatError(f"corpus directory {root} does not exist")
    frames_dir = os.path.join(root, 'frames')
    if not os.path.isdir(frames_dir):
        raise FormatError(f"corpus directory {root} has no frames/ subdirectory")
    if not any(allowed_file(n) for n in os.listdir(frames_dir)):
        raise FormatError(f"{frames_dir} holds no .csv files")


def validate_input_files(paths: Sequence[str]) -> List[str]:
    """Messages for every path that is missing or not a CSV file."""
    errors = []
    for path in paths:
        if not os.path.exists(path):
            errors.append(f"{path}: no such file")
        elif not allowed_file(os.path.basename(path)):
            errors.append(f"{path}: expected a .csv file")
    return errors


def parse_float_list(text: Optional[str], what: str = 'value') -> List[float]:
    if text is None:
        return []
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise ArgumentError(f"invalid {what} list: {text!r}")
