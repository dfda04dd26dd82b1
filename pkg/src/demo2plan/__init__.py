"""demo2plan: turn one-shot teaching demonstrations into validated, affordance-rich robot task plans."""

__version__ = "0.1.0"
