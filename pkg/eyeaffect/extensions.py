from flask_caching import Cache
from flask_executor import Executor

# Feature matrices keyed by input hash; a null cache unless a directory is configured.
cache = Cache()
# Process pool for independent sweep cells.
executor = Executor()
