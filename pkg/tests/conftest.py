import pytest

from meetspace.space import SharedSpace


@pytest.fixture
def two_rooms() -> SharedSpace:
    space = SharedSpace()
    space.register_room("roomA", 4.0, 4.0, (1.0, 3.0))   # virtual [-2,2] x [0,4]
    space.register_room("roomB", 6.0, 3.6, (2.0, 4.0))   # virtual [-3,3] x [0,3.6]
    return space
