import os
from dotenv import load_dotenv

basedir = os.path.abspath(os.path.dirname(__file__))
load_dotenv(os.path.join(basedir, '.env'))


class Config:
    # Pipeline settings file (INI or JSON)
    PIPELINE_CONFIG = os.environ.get('EYEAFFECT_CONFIG') or os.path.join(basedir, 'config.ini')
    OUTPUT_DIR = os.environ.get('EYEAFFECT_OUTPUT_DIR') or os.path.join(basedir, 'output')
    LOG_LEVEL = os.environ.get('EYEAFFECT_LOG_LEVEL') or 'INFO'

    # Feature cache
    CACHE_DIR = os.environ.get('EYEAFFECT_CACHE_DIR')
    CACHE_TYPE = 'FileSystemCache' if CACHE_DIR else 'NullCache'
    CACHE_DEFAULT_TIMEOUT = 0
    CACHE_THRESHOLD = 10000

    # Sweep cells are CPU bound numpy loops; processes avoid the GIL.
    EXECUTOR_TYPE = 'process'
    EXECUTOR_MAX_WORKERS = int(os.environ.get('EYEAFFECT_WORKERS') or os.cpu_count() or 1)
    EXECUTOR_PROPAGATE_EXCEPTIONS = True
