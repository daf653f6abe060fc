"""patchsieve: curation pipeline for security-patch datasets.

Stage one classifies patches (security vs. test/support/defect) with a
confidence gate. Stage two runs an iterative analysis/context-collection
loop over a queryable code index to trace root causes and flag
undecidable patches. Results consolidate into a CVE-indexed dataset, and
a paired detection harness measures the value of the collected context.
"""

__version__ = "0.1.0"
