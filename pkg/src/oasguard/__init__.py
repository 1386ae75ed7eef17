"""Mine response-body constraints from OpenAPI documents and check them."""

__version__ = "0.1.0"

TOOL_VERSION = __version__
