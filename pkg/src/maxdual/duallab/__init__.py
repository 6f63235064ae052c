from .space import *
from .families import *
from .lemmas import *
from .condition import *
from .theorem import *
