from typing import Optional

from eyeaffect.config import ConfigManager
from eyeaffect.errors import ArgumentError
from eyeaffect.services.base import CorpusSource
from eyeaffect.services.csv_source import CsvCorpusSource
from eyeaffect.services.synthetic import SyntheticCorpusSource


def get_source(config: ConfigManager, path: Optional[str] = None) -> CorpusSource:
    corpus = config.get('corpus')
    source_name = corpus.get('source', 'csv')

    if source_name == 'csv':
        return CsvCorpusSource(
            root=path or corpus['path'],
            column_map=config.column_map(),
            frame_base=corpus['frame_base'],
        )
    elif source_name == 'synthetic':
        return SyntheticCorpusSource(
            seed=corpus['synth_seed'],
            n_subjects=corpus['synth_subjects'],
            duration=corpus['synth_minutes'] * 60.0,
            lag=corpus['synth_lag'],
            dimension=corpus['dimension'],
        )
    else:
        raise ArgumentError(f"Unknown corpus source: {source_name}")
