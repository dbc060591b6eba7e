import argparse

from cvrc import __version__
from cvrc.cli.config import TEMPLATE

parser = argparse.ArgumentParser(
    prog='cvrc',
    description='CVRC: complex-valued reservoir computing for InSAR aspect and slope',
    epilog=TEMPLATE,
    formatter_class=argparse.RawDescriptionHelpFormatter)
parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)

# Settings shared by every subcommand; None means "take it from the config file"
common = argparse.ArgumentParser(add_help=False)
common.add_argument('--config', default=None, type=str,
                    help='key = value run configuration (keys listed in `cvrc --help`)')
common.add_argument('--out', default=None, type=str,
                    help='Output directory (default: cvrc_out)')
common.add_argument('--seed', default=None, type=int,
                    help='Top-level seed, split per consumer (default: 0)')
common.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                    help='Override one config key; may be repeated')

network = argparse.ArgumentParser(add_help=False)
network.add_argument('--dynamics', default=None, choices=['simplified', 'general'],
                     help='Reservoir update rule (default: simplified)')

subparsers = parser.add_subparsers(dest='command', metavar='COMMAND')
subparsers.required = True

synth = subparsers.add_parser('synth', parents=[common],
                              help='Generate a synthetic scene and its ground truth')

aspect = subparsers.add_parser('aspect', parents=[common, network],
                               help='Train, classify and evaluate aspect maps')
aspect.add_argument('--baseline', default=None, choices=['cvrc', 'rvrc', 'neighbor'],
                    help='Method to run (default: cvrc)')
aspect.add_argument('--trace', default=None, type=str,
                    help='Also export a reservoir trace along a line, e.g. i=210')
aspect.add_argument('--second-scene', dest='second_scene', action='store_true', default=None,
                    help='Also classify the second scene with the trained networks')

slope = subparsers.add_parser('slope', parents=[common, network],
                              help='Estimate slope angles along scan lines')

sweep = subparsers.add_parser('sweep', parents=[common, network],
                              help='Neuron-count and frame-size sweeps of the aspect experiment')
sweep.add_argument('--grid', default='all', choices=['neurons', 'frames', 'all'],
                   help='Which sweep to run (default: all)')
sweep.add_argument('--baseline', default=None, choices=['cvrc', 'rvrc'],
                   help='Network type to sweep (default: cvrc)')
sweep.add_argument('--workers', default=None, type=int,
                   help='Worker processes for grid points (default: 1)')

trace = subparsers.add_parser('trace', parents=[common, network],
                              help='Train the aspect networks and export one reservoir trace')
trace.add_argument('--trace', default=None, type=str,
                   help='Line spec: i=ROW[,j=START-STOP] or j=COL[,i=START-STOP]')
trace.add_argument('--baseline', default=None, choices=['cvrc', 'rvrc'],
                   help='Network type to trace (default: cvrc)')
