"""Next-edit prediction engine.

Given a project and the edits a developer has already made in a session,
the engine recommends where the next edit goes and what it should contain.
Deterministic static services (rename propagation, reference lookup, clone
search) handle syntactically coherent edit groups; a pluggable locator and
generator handle the rest.
"""

__version__ = "0.1.0"
