"""Authoritative game server and simulation harness for a tabletop
fish-reach rehabilitation game.

The server owns all game mechanics: calibrated hand tracking, a fish
character driven by wander/pursue/flee steering, a velocity-threshold
difficulty agent, touch-endorsement progression, session telemetry, and
questionnaire scoring.  Everything runs headless through the in-process
loopback (see ``fishtank.sim``) or interactively over WebSocket (see
``fishtank.server``).
"""

__version__ = "0.1.0"

PROTOCOL_VERSION = "mrr/1"
