"""Knowledge-augmented question answering over clinical practice guidelines.

Extracts a structured corpus from guideline HTML, generates per-patient
questions around a risk prediction, retrieves and reranks candidate
answers with ontology-aware strategies, settles numeric range questions
by interval arithmetic, and serves the result over HTTP.
"""

__all__ = ["__version__"]

__version__ = "0.1.0"
