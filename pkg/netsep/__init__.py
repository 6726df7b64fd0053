"""
__init__.py file from netsep
"""

from netsep import json_utils, log_utils, config, temporal_graph, read_events, \
    snmf, model_file, forecast, scoring, rank_metrics, negative_sampling, \
    edgebank, eval_metrics, synth, inspect_sources
