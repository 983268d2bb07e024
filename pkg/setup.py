#!/usr/bin/env python
import os.path

from setuptools import setup


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    with open(os.path.join(here, 'requirements.txt')) as f:
        requirements = [line.strip() for line in f
                        if line.strip() and not line.startswith('pytest')]

    setup(name='decodelab',
          version='0.1.0',
          description='Local neural and global matching decoders for the '
                      'rotated surface code',
          packages=['decodetools', 'decodelab'],
          package_data={'decodelab': ['resources/*.svg', 'resources/*.md']},
          install_requires=requirements,
          extras_require={'test': ['pytest>=7.0']},
          entry_points={
              'console_scripts': [
                  'decodelab = decodelab:launch_new_instance',
              ],
          },
          )


if __name__ == '__main__':
    main()
