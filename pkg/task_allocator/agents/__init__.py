from .baseclass import LearningAgent
from .qnet import QNet
