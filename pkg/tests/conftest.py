import numpy as np
import pytest

from eyeaffect import create_app
from eyeaffect.corpus import FRAME_RATE, FrameRecord, synth_corpus


@pytest.fixture
def app(tmp_path):
    app = create_app(test_config={
        "TESTING": True,
        "OUTPUT_DIR": str(tmp_path / "output"),
        "PIPELINE_CONFIG": str(tmp_path / "missing.ini"),
        "CACHE_TYPE": "NullCache",
        "EXECUTOR_MAX_WORKERS": 1,
    })
    yield app

@pytest.fixture
def client(app):
    return app.test_client()

@pytest.fixture
def runner(app):
    return app.test_cli_runner()

@pytest.fixture
def make_frames():
    def build(gaze_x, gaze_y=None, blink=None, pupil=None, direct=None):
        n = len(gaze_x)
        gaze_y = [0.0] * n if gaze_y is None else gaze_y
        blink = [0.0] * n if blink is None else blink
        pupil = [3.0] * n if pupil is None else pupil
        return [FrameRecord(frame_index=i, timestamp=i / FRAME_RATE, confidence=0.98,
                            gaze_x=float(gaze_x[i]), gaze_y=float(gaze_y[i]),
                            blink_intensity=float(blink[i]), pupil_diameter=float(pupil[i]),
                            direct_gaze=None if direct is None else direct[i])
                for i in range(n)]
    return build

@pytest.fixture(scope="session")
def small_corpus():
    # Two 20 s subjects, 0.4 s planted lag.
    return synth_corpus(seed=7, n_subjects=2, duration=20.0, lag=0.4)

@pytest.fixture
def rng():
    return np.random.default_rng(1234)
