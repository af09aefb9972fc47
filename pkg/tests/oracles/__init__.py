"""Reference implementations used only by the tests.

Nothing in here imports the graph IR, the tape kernel, the decode tree or
the pipeline synthesizer; the oracles read the elaborated SpecModel (or
the MiA stage declarations) and work things out on their own.
"""
