"""Reference implementation of the scripted-teacher HTTP protocol."""

__version__ = "0.1.0"

from .policy import ScriptedTeacher, hash_normals, hash_uniforms
from .server import load_config, make_handler, serve
