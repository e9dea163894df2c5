from typing import List

from eyeaffect.corpus import AnnotationTrace, FrameRecord, Partition, synth_corpus, synth_partition
from eyeaffect.errors import FormatError
from eyeaffect.services.base import CorpusSource


class SyntheticCorpusSource(CorpusSource):
    """In-memory corpus with a planted annotation lag."""

    def __init__(self, seed: int, n_subjects: int, duration: float, lag: float,
                 n_annotators: int = 3, dimension: str = 'arousal') -> None:
        self.seed = seed
        self.lag = lag
        self.dimension = dimension
        self._frames, self._traces = synth_corpus(seed, n_subjects, duration, lag, n_annotators, dimension)

    def subjects(self) -> List[str]:
        return sorted(self._frames)

    def load_frames(self, subject: str) -> List[FrameRecord]:
        try:
            return self._frames[subject]
        except KeyError:
            raise FormatError(f"no synthetic subject {subject}")

    def load_traces(self, subject: str, dimension: str) -> List[AnnotationTrace]:
        if dimension != self.dimension:
            raise FormatError(f"synthetic corpus only carries {self.dimension} annotations")
        return self._traces[subject]

    def partition(self) -> Partition:
        return synth_partition(self.subjects())
