"""Control-explicit, data-symbolic LTL model checking for process models with
bounded input variables."""

__version__ = "0.1.0"
