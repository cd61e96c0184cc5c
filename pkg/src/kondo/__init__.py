"""kondo: grid-world rearrangement assistance.

Plans capacitated pickup-and-delivery routes, replans online when the acting
agent deviates, generates task scenarios, runs scripted-agent experiments,
and serves an interactive session protocol for human play.
"""

__version__ = "0.1.0"
