# -*- coding: utf-8 -*-
"""
Alert stream reporting.

Reads an alerts.jsonl stream written by 'cadstream detect' and renders it as a
plot-ready score timeline (one CSV row per alert) and a short text summary.
An anomaly identifier is a unique discovery of an algorithm when no alert of
any other algorithm in the stream contains it.
"""
import json
import logging
from collections import Counter, defaultdict

TIMELINE_FIELDS = ['window_id', 'algorithm', 'score', 'strength', 'start', 'end',
                   'n_anomalies', 'unique', 'unique_ids', 'marker']

logger = logging.getLogger('report')


def read_alerts(path):
    """
    Read an alert stream. The leading metadata line is returned separately;
    malformed lines are skipped with a warning.

    Args:
        path (str): alerts.jsonl path

    Returns:
        tuple: (metadata dict, list of alert dicts in file order)

    Raises:
        OSError: the file cannot be read
    """
    meta, alerts = {}, []
    with open(path, 'r') as alert_file:
        for line_num, line in enumerate(alert_file, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except ValueError as e:
                logger.warning("Skipping malformed line %d: %s." % (line_num, e))
                continue
            if not isinstance(record, dict):
                logger.warning("Skipping line %d: not a JSON object." % line_num)
                continue
            if 'meta' in record and len(record) == 1:
                meta = record['meta']
                continue
            if 'algorithm' not in record or 'window_id' not in record:
                logger.warning("Skipping line %d: missing algorithm or window_id." % line_num)
                continue
            alerts.append(record)
    return meta, alerts


def unique_discoveries(alerts):
    """
    Identifiers of every alert found by no other algorithm.

    Returns:
        list: one set per alert, in alert order
    """
    by_algorithm = defaultdict(set)
    for alert in alerts:
        by_algorithm[alert['algorithm']].update(alert.get('anomalies', ()))

    unique = []
    for alert in alerts:
        others = set()
        for algorithm, ids in by_algorithm.items():
            if algorithm != alert['algorithm']:
                others |= ids
        unique.append(set(alert.get('anomalies', ())) - others)
    return unique


def build_timeline(alerts):
    """Timeline rows, one per alert, sorted by window then algorithm."""
    rows = []
    for alert, unique in zip(alerts, unique_discoveries(alerts)):
        rows.append({'window_id': alert['window_id'], 'algorithm': alert['algorithm'],
                     'score': alert.get('score'), 'strength': alert.get('strength'),
                     'start': alert.get('start'), 'end': alert.get('end'),
                     'n_anomalies': len(alert.get('anomalies', ())),
                     'unique': len(unique), 'unique_ids': ' '.join(sorted(unique)),
                     'marker': '*' if unique else ''})
    rows.sort(key=lambda row: (row['window_id'], row['algorithm']))
    return rows


def summarize(alerts, top=10):
    """Human readable summary of an alert stream."""
    if not alerts:
        return "No alerts."
    per_algorithm = Counter(alert['algorithm'] for alert in alerts)
    windows = sorted(set(alert['window_id'] for alert in alerts))
    frequent = Counter()
    for alert in alerts:
        frequent.update(alert.get('anomalies', ()))

    lines = ["%d alerts in %d windows (first %s, last %s)."
             % (len(alerts), len(windows), windows[0], windows[-1])]
    for algorithm, count in sorted(per_algorithm.items()):
        lines.append("  %-16s %d" % (algorithm, count))
    lines.append("Most frequent anomalies:")
    for ident, count in frequent.most_common(top):
        lines.append("  %-24s %d" % (ident, count))
    unique = [ids for ids in unique_discoveries(alerts) if ids]
    if unique:
        lines.append("Unique discoveries: %d identifiers in %d alerts."
                     % (len(set().union(*unique)), len(unique)))
    return '\n'.join(lines)
