# Copyright (c) Facebook, Inc. and its affiliates.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import copy
import csv
import datetime
import json
import logging
import os
from typing import Dict, Iterable, List

import git

from cvrc.utils import log, shandle


def gather_metadata() -> Dict:
    date_start = datetime.datetime.now().strftime('%Y-%m-%d %H:%M:%S.%f')
    # gathering git metadata
    try:
        repo = git.Repo(search_parent_directories=True)
        git_data = dict(
            commit=repo.commit().hexsha,
            branch=None if repo.head.is_detached else repo.active_branch.name,
            is_dirty=repo.is_dirty(),
            path=repo.git_dir,
        )
    except (git.InvalidGitRepositoryError, git.NoSuchPathError, ValueError):
        git_data = None
    return dict(
        date_start=date_start,
        date_end=None,
        successful=False,
        git=git_data,
    )


class FileWriter:
    """
    Owns one run directory: out.log mirrors the package log, meta.json holds
    the arguments and git provenance, and result tables go to CSV files.
    """

    def __init__(self, basepath: str, xp_args: dict = None):
        self.basepath = os.path.expandvars(os.path.expanduser(basepath))
        if xp_args is None:
            xp_args = {}
        self.metadata = gather_metadata()
        # copy so that closing does not serialize objects mutated by the run
        self.metadata['args'] = copy.deepcopy(xp_args)

        if not os.path.exists(self.basepath):
            log.info('Creating output directory: %s', self.basepath)
            os.makedirs(self.basepath, exist_ok=True)
        else:
            log.info('Found output directory: %s', self.basepath)

        self.paths = dict(
            msg=self.path('out.log'),
            meta=self.path('meta.json'),
        )

        log.info('Saving arguments to %s', self.paths['meta'])
        self._save_metadata()

        if os.path.exists(self.paths['msg']):
            log.warning('Path to message file already exists. New data will be appended.')
        self._fhandle = logging.FileHandler(self.paths['msg'])
        self._fhandle.setFormatter(shandle.formatter)
        log.addHandler(self._fhandle)

    def path(self, name: str) -> str:
        return os.path.join(self.basepath, name)

    def write_table(self, name: str, rows: Iterable[Dict], fieldnames: List[str] = None) -> str:
        rows = list(rows)
        if fieldnames is None:
            fieldnames = []
            for row in rows:
                for k in row:
                    if k not in fieldnames:
                        fieldnames.append(k)
        target = self.path(name)
        tmp = target + '.part'
        with open(tmp, 'w', newline='') as csvfile:
            writer = csv.DictWriter(csvfile, fieldnames=fieldnames)
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
        os.replace(tmp, target)
        log.info('Wrote %d rows to %s', len(rows), target)
        return target

    def write_text(self, name: str, text: str) -> str:
        target = self.path(name)
        tmp = target + '.part'
        with open(tmp, 'w') as f:
            f.write(text)
        os.replace(tmp, target)
        return target

    def close(self, successful: bool = True) -> None:
        self.metadata['date_end'] = datetime.datetime.now().strftime('%Y-%m-%d %H:%M:%S.%f')
        self.metadata['successful'] = successful
        self._save_metadata()
        log.removeHandler(self._fhandle)
        self._fhandle.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close(successful=exc_type is None)
        return False

    def _save_metadata(self) -> None:
        with open(self.paths['meta'], 'w') as jsonfile:
            json.dump(self.metadata, jsonfile, indent=4, sort_keys=True, default=str)
