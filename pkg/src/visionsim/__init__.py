"""Headless vision-science experiment engine.

Physically parameterized depth-dependent defocus simulation (autofocal,
progressive, and astigmatic lens models), a protocol-driven experiment
controller, device-agnostic gaze recording, a multi-distance optotype
matching task with a synthetic observer, and a questionnaire engine.
Runs fully headless through the CLI or interactively through the served
browser UI.
"""

__version__ = "0.1.0"
