# -*- coding: utf-8 -*-
# Licensed under the BSD License

import os
import subprocess
import json
import inspect

netsep_dir = os.path.dirname(os.path.realpath(__file__))

# bumped whenever the byte layout in docs/model_format.md changes
model_format_version = 1


def _get_git_output(args, capture_stderr=False):
    """
    Get output from git, ensuring that it is of the ``str`` type, not bytes.
    """

    argv = ['git', '-C', netsep_dir] + args

    if capture_stderr:
        data = subprocess.check_output(argv, stderr=subprocess.STDOUT)
    else:
        data = subprocess.check_output(argv)

    return data.strip().decode('utf8')


def _get_gitinfo_file(git_file=None):
    """
    Get saved info from GIT_INFO file that was created when installing package
    """
    if git_file is None:
        git_file = os.path.join(netsep_dir, 'GIT_INFO')

    with open(git_file) as data_file:
        data = json.loads(data_file.read().strip())

    return {'git_origin': data[0], 'git_hash': data[1],
            'git_description': data[2], 'git_branch': data[3]}


def construct_version_info():
    version_file = os.path.join(netsep_dir, 'VERSION')
    with open(version_file) as f:
        version = f.read().strip()

    version_info = {'version': version, 'git_origin': '', 'git_hash': '',
                    'git_description': '', 'git_branch': ''}

    try:
        version_info['git_origin'] = _get_git_output(
            ['config', '--get', 'remote.origin.url'],
            capture_stderr=True)
        version_info['git_hash'] = _get_git_output(
            ['rev-parse', 'HEAD'],
            capture_stderr=True)
        version_info['git_description'] = _get_git_output(
            ['describe', '--dirty', '--tag', '--always'])
        version_info['git_branch'] = _get_git_output(
            ['rev-parse', '--abbrev-ref', 'HEAD'],
            capture_stderr=True)
    except (subprocess.CalledProcessError, OSError):  # pragma: no cover
        try:
            # Check if a GIT_INFO file was created when installing package
            version_info.update(_get_gitinfo_file())
        except (IOError, OSError, ValueError):
            pass

    return version_info


def history_string(notes=''):
    """
    Creates a standardized history string that the report writers
    embed in their outputs. Optionally add notes.
    """
    history = 'produced by ' + str(inspect.stack()[1][3]) + '()'
    history += ' in ' + os.path.basename(inspect.stack()[1][1])
    history += ' using netsep {} (model format v{})'.format(
        version, model_format_version)
    if git_hash:
        history += ' git {}'.format(git_hash)
    if (notes is not None) and (notes != ''):
        history += '; ' + notes
    return history


def version_string():
    """
    Text printed by ``netsep --version``.
    """
    lines = ['netsep {0}'.format(version),
             'model format v{0}'.format(model_format_version)]
    if git_description:
        lines.append('git description = {0}'.format(git_description))
    if git_branch:
        lines.append('git branch = {0}'.format(git_branch))
    return '\n'.join(lines)


version_info = construct_version_info()
version = version_info['version']
git_origin = version_info['git_origin']
git_hash = version_info['git_hash']
git_description = version_info['git_description']
git_branch = version_info['git_branch']


def main():
    print(version_string())


if __name__ == '__main__':
    main()
