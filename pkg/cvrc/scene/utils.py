import enum

# aspect classes, in teacher-matrix row order
NORTH = 0
EAST = 1
SOUTH = 2
WEST = 3
FLAT = 4
N_CLASSES = 5

CLASS_NAMES = ['north', 'east', 'south', 'west', 'flat']
CLASS_INDEX = {name: i for i, name in enumerate(CLASS_NAMES)}

# label map sentinels
MISSING = 254
MASKED = 255

# InSAR pixel spacing in metres
RANGE_SPACING = 30.0
AZIMUTH_SPACING = 50.0


class Direction(enum.Enum):
    EAST_WEST = 'ew'
    NORTH_SOUTH = 'ns'


def class_name(index):
    if index == MASKED:
        return 'masked'
    if index == MISSING:
        return 'missing'
    return CLASS_NAMES[index]
