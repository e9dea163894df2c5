import logging
import os
from typing import Dict, List, Optional

from eyeaffect.corpus import (AnnotationTrace, FrameRecord, Partition, default_partition,
                              parse_annotations, parse_frames, read_partition)
from eyeaffect.errors import FormatError
from eyeaffect.services.base import CorpusSource
from eyeaffect.utils.validators import validate_corpus_dir

logger = logging.getLogger(__name__)


class CsvCorpusSource(CorpusSource):
    """RECOLA-style directory: ``frames/<subject>.csv``,
    ``annotations/<dimension>/<subject>.csv`` and an optional ``partition.ini``.
    """

    def __init__(self, root: str, column_map: Optional[Dict[str, str]] = None, frame_base: int = 1) -> None:
        validate_corpus_dir(root)
        self.root = root
        self.column_map = column_map
        self.frame_base = frame_base

    def subjects(self) -> List[str]:
        names = os.listdir(os.path.join(self.root, 'frames'))
        return sorted(os.path.splitext(n)[0] for n in names if n.lower().endswith('.csv'))

    def load_frames(self, subject: str) -> List[FrameRecord]:
        path = os.path.join(self.root, 'frames', f'{subject}.csv')
        if not os.path.exists(path):
            raise FormatError(f"no frame file for subject {subject}")
        with open(path, 'rb') as f:
            return parse_frames(f, self.column_map, self.frame_base)

    def load_traces(self, subject: str, dimension: str) -> List[AnnotationTrace]:
        path = os.path.join(self.root, 'annotations', dimension, f'{subject}.csv')
        if not os.path.exists(path):
            raise FormatError(f"no {dimension} annotations for subject {subject}")
        with open(path, 'rb') as f:
            return parse_annotations(f, dimension)

    def partition(self) -> Partition:
        path = os.path.join(self.root, 'partition.ini')
        if os.path.exists(path):
            partition = read_partition(path)
        else:
            logger.info("no partition.ini; using the standard RECOLA split", extra={'stage': 'ingest'})
            partition = default_partition()
        return partition.restricted_to(self.subjects())
