"""docstage: document-lifecycle analytics and temporal-stage prediction
from collaborative writing-application telemetry logs."""

__version__ = "0.1.0"
