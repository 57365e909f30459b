"""Multi-armed quantum bandits: environments, learners and lower-bound audits."""

__version__ = "0.1.0"
