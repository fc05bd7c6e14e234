# -*- coding: utf-8 -*-
"""
Output provenance and writers.

Every output file records the tool version, the seed, a SHA256 digest of the
effective configuration and its creation time: CSV tables as leading '# '
comment lines, the alert stream as a first {"meta": ...} line and the run
summary under a "meta" key.
"""
import csv
import hashlib
import json
import os
from datetime import datetime, timezone

from cadstream import __version__

TOOL_NAME = 'cadstream'


def compute_hash(data_path):
    """
    Compute the SHA256 hash of a file.

    Args:
        data_path (str): path of the file

    Returns:
        str: hexadecimal digest
    """
    sha256 = hashlib.sha256()
    with open(data_path, 'rb') as data_file:
        for block in iter(lambda: data_file.read(4096), b''):
            sha256.update(block)
    return sha256.hexdigest()


def config_digest(config):
    """
    SHA256 digest of the canonical 'section.key=value' listing of a
    configuration, sorted by key.

    Args:
        config (configparser.ConfigParser or dict): section -> option -> value
    """
    lines = []
    for section in config:
        if section == 'DEFAULT':
            continue
        for key, value in config[section].items():
            lines.append('%s.%s=%s' % (section, key, value))
    return hashlib.sha256('\n'.join(sorted(lines)).encode('utf-8')).hexdigest()


def metadata(config=None, seed=None, **extra):
    """Metadata record stamped on every output file."""
    meta = {'tool': TOOL_NAME,
            'version': __version__,
            'seed': seed,
            'config_sha256': config_digest(config) if config is not None else None,
            'created': datetime.now(timezone.utc).strftime('%Y-%m-%dT%H:%M:%SZ')}
    meta.update(extra)
    return meta


def _ensure_parent(path):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)


def write_csv(path, fieldnames, rows, meta=None):
    """Write dict rows as CSV, preceded by '# key: value' metadata lines."""
    _ensure_parent(path)
    with open(path, 'w', newline='') as csv_file:
        for key, value in (meta or {}).items():
            csv_file.write('# %s: %s\n' % (key, value))
        writer = csv.DictWriter(csv_file, fieldnames=fieldnames, extrasaction='ignore')
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def read_csv(path):
    """
    Read a CSV written by write_csv.

    Returns:
        tuple: (metadata dict, list of row dicts with string values)
    """
    meta = {}
    with open(path, 'r', newline='') as csv_file:
        lines = []
        for line in csv_file:
            if line.startswith('# ') and not lines:
                key, _, value = line[2:].rstrip('\n').partition(': ')
                meta[key] = value
            else:
                lines.append(line)
    return meta, list(csv.DictReader(lines))


def write_json(path, payload, meta=None):
    """Write a JSON document with the metadata under a 'meta' key."""
    _ensure_parent(path)
    document = {'meta': meta or {}}
    document.update(payload)
    with open(path, 'w') as json_file:
        json.dump(document, json_file, indent=2, sort_keys=True)


class AlertWriter(object):
    """
    Append-only JSON Lines alert stream. The first line is {"meta": {...}},
    every further line one alert.

    Usable as a context manager.
    """
    def __init__(self, path, meta=None):
        self.path = path
        self.meta = meta or {}
        self.count = 0
        self._handle = None

    def __enter__(self):
        _ensure_parent(self.path)
        self._handle = open(self.path, 'w')
        self._handle.write(json.dumps({'meta': self.meta}, sort_keys=True) + '\n')
        return self

    def write(self, alert):
        record = alert.to_dict() if hasattr(alert, 'to_dict') else dict(alert)
        self._handle.write(json.dumps(record, sort_keys=True) + '\n')
        self._handle.flush()
        self.count += 1

    def __exit__(self, exc_type, exc_value, tb):
        self._handle.close()
        self._handle = None
