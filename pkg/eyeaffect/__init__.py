from typing import Any, Dict, Optional

from flask import Flask

from config import Config
from .config import ConfigManager
from .extensions import cache, executor
from .logging_config import configure_logging

__version__ = '0.1.0'


def create_app(config_class: type = Config, test_config: Optional[Dict[str, Any]] = None) -> Flask:
    configure_logging(config_class.LOG_LEVEL)

    app = Flask(__name__)
    app.config.from_object(config_class)
    if test_config:
        app.config.update(test_config)

    cache.init_app(app)
    executor.init_app(app)
    app.extensions['pipeline_config'] = ConfigManager(app.config['PIPELINE_CONFIG'])

    from .cli import pipeline
    from .routes import main
    app.register_blueprint(main)
    app.register_blueprint(pipeline)
    return app
