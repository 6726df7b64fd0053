#!/usr/bin/env python
"""
Link prediction and red-team detection on the LANL authentication capture.

The capture is not shipped; download auth.txt.gz and redteam.txt.gz and
point --auth and --redteam at them. The first 30 days at hourly windows
give 720 windows with 12,702 hosts; expect the fit to take hours.
"""
from argparse import ArgumentParser
from pathlib import Path
import sys
from netsep.cli import main

THIRTY_DAYS = 30 * 24 * 3600

parser = ArgumentParser(
    description="Reproduce the LANL evaluation with netsep")
parser.add_argument('auth', type=Path, help='LANL auth.txt(.gz)')
parser.add_argument('redteam', type=Path, help='LANL redteam.txt(.gz)')
parser.add_argument('--outdir', type=Path, default=Path('lanl_run'),
                    help='Directory for every output. Default is lanl_run')
parser.add_argument('--K', type=int, default=5)
parser.add_argument('--L', type=int, default=4)
parser.add_argument('--train-windows', type=int, default=168)
parser.add_argument('--valid-windows', type=int, default=24)
parser.add_argument('--runs', type=int, default=10)
parser.add_argument('--threads', type=int, default=1)
parser.add_argument('--seed', type=int, default=0)

args = parser.parse_args()
args.outdir.mkdir(parents=True, exist_ok=True)
graph = str(args.outdir / 'lanl.nsg')
labels = graph + '.labels.csv'
model = str(args.outdir / 'lanl.nsm')
common = ['--seed', str(args.seed), '--threads', str(args.threads)]
hyper = ['--K', str(args.K), '--L', str(args.L)]

steps = [
    ['ingest', '--input', str(args.auth), '--out', graph, '--preset', 'lanl',
     '--window-secs', '3600', '--time-limit', str(THIRTY_DAYS),
     '--labels', str(args.redteam)],
    ['train', '--input', graph, '--out', model,
     '--train-windows', str(args.train_windows),
     '--trace', str(args.outdir / 'trace.csv')] + hyper,
    ['eval', '--input', graph, '--model', model, '--labels', labels,
     '--out', str(args.outdir / 'report.json'),
     '--train-windows', str(args.train_windows),
     '--valid-windows', str(args.valid_windows), '--runs', str(args.runs),
     '--baselines', 'edgebank-inf,edgebank-w',
     '--per-window-csv', str(args.outdir / 'windows.csv')] + hyper,
]
for step in steps:
    code = main(step + common)
    if code:
        sys.exit(code)
