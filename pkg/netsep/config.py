"""
YAML configuration files for the command line.

Keys are flag destination names (dashes may be used in place of
underscores). Top-level scalar keys apply to every subcommand that knows
them; a mapping named after a subcommand overrides them for that
subcommand only:

    seed: 3
    threads: 4
    window_secs: 3600
    train:
      K: 5
      L: 4
      l1: 0.001
    eval:
      runs: 10
      tasks: anomaly,random,historical,inductive

Flags given on the command line always win over the file.
"""
import logging
import yaml

logger = logging.getLogger(__name__)


def _normalise(key):
    return str(key).replace('-', '_')


def load_config(path):
    """
    Returns the mapping stored in a YAML file, {} for an empty file
    """
    with open(path, 'r') as fl:
        config = yaml.safe_load(fl)
    if config is None:
        return {}
    if not isinstance(config, dict):
        raise ValueError('{}: configuration must be a YAML mapping'.format(path))
    return config


def config_values(config, command, commands, known, all_known=None):
    """
    Values of one subcommand from a parsed configuration.
    - config:	Mapping from load_config
    - command:	Subcommand being run
    - commands:	Every subcommand name, used to tell sections from values
    - known:	Destination names the subcommand accepts
    - all_known:	Destination names accepted by any subcommand; keys
                outside it are reported. Defaults to known.
    """
    values = {}
    for key, value in config.items():
        if key in commands or isinstance(value, dict):
            continue
        values[_normalise(key)] = value
    section = config.get(command) or {}
    if not isinstance(section, dict):
        raise ValueError('config section {} must be a mapping'.format(command))
    for key, value in section.items():
        values[_normalise(key)] = value
    all_known = known if all_known is None else all_known
    for key in sorted(values):
        if key not in all_known:
            logger.warning('ignoring unknown config key %s', key)
    return {k: v for k, v in values.items() if k in known}
