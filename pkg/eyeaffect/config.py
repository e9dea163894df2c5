import configparser
import io
import json
import os
from typing import Any, Dict, Optional, Tuple

from eyeaffect.corpus import DEFAULT_COLUMN_MAP, FRAME_RATE
from eyeaffect.errors import ArgumentError
from eyeaffect.lld import DEFAULT_RING_INDICES, ThresholdConfig
from eyeaffect.model import ModelConfig
from eyeaffect.selection import DEFAULT_BINS, ShiftConfig
from eyeaffect.utils.validators import parse_float_list

CONFIG_FILE = 'config.ini'

DEFAULT_CONFIG: Dict[str, Dict[str, Any]] = {
    'thresholds': ThresholdConfig().as_dict(),
    'features': {'window': 200, 'stride': 1, 'rate': FRAME_RATE},
    'wavelet': {'levels': 7},
    'selection': {'thresholds': '0.1,0.15,0.2', 'shifts': '0:4.4:0.2', 'bins': DEFAULT_BINS},
    'model': ModelConfig().as_dict(),
    'corpus': {
        'source': 'csv',
        'path': 'corpus',
        'dimension': 'arousal',
        'frame_base': 1,
        'ring_indices': ','.join(str(i) for i in DEFAULT_RING_INDICES),
        **{f'column.{key}': value for key, value in DEFAULT_COLUMN_MAP.items()},
        'synth_seed': 7,
        'synth_subjects': 8,
        'synth_minutes': 2.0,
        'synth_lag': 2.0,
    },
    'fusion': {'retune_shift': False},
}


def _coerce(section: str, key: str, value: Any) -> Any:
    """Cast a raw value to the type of its default."""
    default = DEFAULT_CONFIG[section][key]
    if isinstance(value, str) and not isinstance(default, str):
        text = value.strip()
        try:
            if isinstance(default, bool):
                if text.lower() not in ('true', 'false', 'yes', 'no', '1', '0', 'on', 'off'):
                    raise ValueError(text)
                return text.lower() in ('true', 'yes', '1', 'on')
            if isinstance(default, int):
                return int(text)
            if isinstance(default, float):
                return float(text)
            if isinstance(default, list):
                return [int(v) for v in text.replace('[', '').replace(']', '').split(',') if v.strip()]
        except ValueError:
            raise ArgumentError(f"[{section}] {key}: cannot read {value!r}")
    return value


def parse_shifts(text: str) -> ShiftConfig:
    """``start:stop:step`` range or a comma-separated list of seconds."""
    text = str(text).strip()
    if ':' in text:
        parts = text.split(':')
        if len(parts) != 3:
            raise ArgumentError(f"shift range must be start:stop:step, got {text!r}")
        bounds = parse_float_list(','.join(parts), 'shift range')
        if len(bounds) != 3:
            raise ArgumentError(f"shift range must be start:stop:step, got {text!r}")
        start, stop, step = bounds
        return ShiftConfig.from_range(start, stop, step)
    return ShiftConfig(tuple(parse_float_list(text, 'shift')))


class ConfigManager:
    def __init__(self, filepath: Optional[str] = CONFIG_FILE) -> None:
        self.filepath = filepath
        self._config: Dict[str, Dict[str, Any]] = {}
        self.load()

    def load(self) -> None:
        self._config = {section: dict(values) for section, values in DEFAULT_CONFIG.items()}
        if not self.filepath or not os.path.exists(self.filepath):
            return
        if self.filepath.endswith('.json'):
            with open(self.filepath, 'r', encoding='utf-8') as f:
                try:
                    data = json.load(f)
                except json.JSONDecodeError as e:
                    raise ArgumentError(f"{self.filepath}: {e}")
        else:
            parser = configparser.ConfigParser(interpolation=None)
            parser.optionxform = str
            try:
                parser.read(self.filepath, encoding='utf-8')
            except configparser.Error as e:
                raise ArgumentError(f"{self.filepath}: {e}")
            data = {section: dict(parser.items(section)) for section in parser.sections()}
        self.update(data, persist=False)

    def save(self) -> None:
        if not self.filepath:
            return
        with open(self.filepath, 'w', encoding='utf-8') as f:
            if self.filepath.endswith('.json'):
                json.dump(self._config, f, indent=4, ensure_ascii=False)
            else:
                f.write(self.to_ini())

    def get(self, section: str, key: Optional[str] = None, default: Any = None) -> Any:
        values = self._config.get(section, {})
        if key is None:
            return values or default
        return values.get(key, default)

    def set(self, section: str, key: str, value: Any, persist: bool = False) -> None:
        if section not in DEFAULT_CONFIG or key not in DEFAULT_CONFIG[section]:
            raise ArgumentError(f"unknown config key [{section}] {key}")
        self._config[section][key] = _coerce(section, key, value)
        if persist:
            self.save()

    def get_all(self) -> Dict[str, Dict[str, Any]]:
        return self._config

    def update(self, new_data: Dict[str, Dict[str, Any]], persist: bool = False) -> None:
        for section, values in new_data.items():
            if section not in DEFAULT_CONFIG or not isinstance(values, dict):
                raise ArgumentError(f"unknown config section [{section}]")
            for key, value in values.items():
                self.set(section, key, value)
        # Fail early on values the typed views reject.
        self.threshold_config()
        self.model_config()
        self.shift_config()
        self.selection_thresholds()
        if persist:
            self.save()

    def to_ini(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        for section, values in self._config.items():
            parser[section] = {key: ','.join(str(v) for v in value) if isinstance(value, list) else str(value)
                               for key, value in values.items()}
        buffer = io.StringIO()
        parser.write(buffer)
        return buffer.getvalue()

    def threshold_config(self) -> ThresholdConfig:
        return ThresholdConfig(**self._config['thresholds'])

    def model_config(self) -> ModelConfig:
        return ModelConfig(**self._config['model'])

    def shift_config(self) -> ShiftConfig:
        return parse_shifts(self._config['selection']['shifts'])

    def selection_thresholds(self) -> Tuple[float, ...]:
        thresholds = tuple(parse_float_list(str(self._config['selection']['thresholds']), 'threshold'))
        if any(t < 0 for t in thresholds):
            raise ArgumentError("MI thresholds must be non-negative")
        return thresholds

    def column_map(self) -> Dict[str, str]:
        corpus = self._config['corpus']
        return {key: corpus[f'column.{key}'] for key in DEFAULT_COLUMN_MAP}

    def ring_indices(self) -> Tuple[int, ...]:
        try:
            return tuple(int(v) for v in str(self._config['corpus']['ring_indices']).split(',') if v.strip())
        except ValueError:
            raise ArgumentError("[corpus] ring_indices must be comma-separated integers")
