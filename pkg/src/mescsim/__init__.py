"""Mixed-criticality CPU + streaming-accelerator simulator and response-time analyzer."""

__version__ = "0.1.0"
