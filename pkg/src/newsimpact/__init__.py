"""Impact assessment pipeline for AI technologies, grounded in news coverage.

Stages: ingest a news-article corpus, extract (technology description,
negative impact) pairs with an LLM, curate and split the pair dataset,
emit fine-tuning files, categorize impacts into a fixed 10-category
taxonomy, generate candidate impacts from descriptions, and evaluate
generations against a human rubric with distribution and coverage-gap
reports.
"""

__version__ = "0.1.0"
