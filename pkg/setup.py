from setuptools import setup
from netsep import version
import os
import json

data = [version.git_origin, version.git_hash,
        version.git_description, version.git_branch]
with open(os.path.join('netsep', 'GIT_INFO'), 'w') as outfile:
    json.dump(data, outfile)


def package_files(package_dir, subdirectory):
    # walk the input package_dir/subdirectory
    # return a package_data list
    paths = []
    directory = os.path.join(package_dir, subdirectory)
    for (path, directories, filenames) in os.walk(directory):
        for filename in filenames:
            path = path.replace(package_dir + '/', '')
            paths.append(os.path.join(path, filename))
    return paths


data_files = package_files('netsep', 'data') + ['VERSION', 'GIT_INFO']

setup_args = {
    'name':         'netsep',
    'license':      'BSD',
    'version':      version.version,
    'description':  'Source separation of windowed communication graphs '
                    'with superposed nonnegative matrix factorization.',
    'packages':     ['netsep', 'netsep.data'],
    'package_dir':  {'netsep': 'netsep'},
    'package_data': {'netsep': data_files},
    'install_requires': ['numpy', 'scipy', 'pandas>=1.5',
                         'scikit-learn>=1.0', 'PyYAML>=5.1',
                         'python_dateutil>=2.6.0'],
    'extras_require': {'test': ['pytest', 'pytest-cov', 'pytest-randomly']},
    'include_package_data': True,
    'zip_safe':     False,
    'entry_points': {'console_scripts': ['netsep=netsep.cli:console_main']},
    'scripts': ['scripts/reproduce_lanl.py']
}

if __name__ == '__main__':
    setup(*(), **setup_args)
