from .arguments import parser
from .commands import main
