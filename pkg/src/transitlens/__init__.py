"""transitlens: travel-mode and sentiment mining of transit social-media posts.

A reasoner agent labels each post (travel mode, sentiment, rationale), a
verifier agent scores those labels, humans add their own scores through a
small web service, and analytics summarize the labeled corpus.
"""

__version__ = "0.1.0"
