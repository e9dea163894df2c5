from abc import ABC, abstractmethod
from typing import List

from eyeaffect.corpus import AnnotationTrace, FrameRecord, Partition


class CorpusSource(ABC):
    @abstractmethod
    def subjects(self) -> List[str]:
        """Subject identifiers in a stable order."""
        pass

    @abstractmethod
    def load_frames(self, subject: str) -> List[FrameRecord]:
        pass

    @abstractmethod
    def load_traces(self, subject: str, dimension: str) -> List[AnnotationTrace]:
        """One trace per annotator."""
        pass

    @abstractmethod
    def partition(self) -> Partition:
        """Train/validation/test split restricted to the available subjects."""
        pass
