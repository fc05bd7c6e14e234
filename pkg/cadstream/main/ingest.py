# -*- coding: utf-8 -*-
"""
Stream ingestion: parse raw records into events and materialize sliding window
feature matrices.

Two stream kinds are supported:

- access_log: Apache common/combined log records. Columns (entities) are client
  hosts, rows (features) are request paths and values are request counts.
- price_csv: daily closing prices. Columns are symbols, rows are trading days
  and values are day-over-day price changes in percent.

Every matrix handed to the detectors has at least two rows and at least
'min_entities' columns; windows failing that are skipped and counted.
"""
import csv
import logging
import math
import os
import re
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from cadstream.main.errors import ConfigError, ContractError, IngestError

STREAM_KINDS = ('access_log', 'price_csv')

# window defaults per stream kind: (length, step) in seconds or trading days
WINDOW_DEFAULTS = {'access_log': (3600, 900),
                   'price_csv': (30, 3)}

LOG_TIME_FORMAT = '%d/%b/%Y:%H:%M:%S %z'
PRICE_DATE_FORMAT = '%Y-%m-%d'

LOG_REGEX = re.compile(
    r'^(?P<host>\S+) \S+ \S+ \[(?P<time>[^\]]*)\] '
    r'"(?P<request>[^"]*)" (?P<status>\d{3}|-) (?P<size>\d+|-)'
)


@dataclass(frozen=True)
class Event:
    """
    A single stream observation.

    Attributes:
        timestamp (int): seconds since the Unix epoch (UTC)
        entity (str): column identifier (client host or symbol)
        feature (str): row identifier (request path or trading date)
        value (float): nonnegative count or a closing price
    """
    timestamp: int
    entity: str
    feature: str
    value: float = 1.0


@dataclass(frozen=True)
class WindowSpec:
    """
    Sliding window geometry. 'length' and 'step' are seconds for access logs
    and trading days for price series.
    """
    length: int
    step: int
    min_entities: int = 2
    max_delay: int = 0

    def __post_init__(self):
        if self.length <= 0:
            raise ConfigError("Window length must be positive, got %s." % self.length)
        if self.step <= 0 or self.step > self.length:
            raise ConfigError("Window step must be in (0, length], got %s." % self.step)
        if self.min_entities < 2:
            raise ConfigError("Minimum entity count must be at least 2, got %s."
                              % self.min_entities)
        if self.max_delay < 0:
            raise ConfigError("Maximum delay must be nonnegative, got %s." % self.max_delay)

    @classmethod
    def for_kind(cls, kind, length=None, step=None, min_entities=2, max_delay=0):
        """
        Build a window specification, filling unset geometry with the defaults
        of the stream kind (one hour stepping by a quarter for access logs, 30
        trading days stepping by 3 for price series).

        Raises:
            ConfigError: unknown stream kind or invalid geometry
        """
        if kind not in WINDOW_DEFAULTS:
            raise ConfigError("Unsupported stream kind '%s'." % kind)
        default_length, default_step = WINDOW_DEFAULTS[kind]
        if length is None:
            length = default_length
            if step is None:
                step = default_step
        if step is None:
            step = max(1, length // 4) if kind == 'access_log' else min(length, default_step)
        return cls(int(length), int(step), int(min_entities), int(max_delay))


@dataclass(frozen=True)
class FeatureMatrix:
    """
    A window materialized as an M x n matrix: rows are features, columns are
    entities. The data array is converted to float64 and made read-only.

    Attributes:
        rows (tuple): feature identifiers, one per row
        cols (tuple): entity identifiers, one per column (distinct)
        data (numpy.ndarray): M x n values
        window_id (int): ordinal of the window in its stream
        start (float): window start (inclusive), if known
        end (float): window end (exclusive), if known
    """
    rows: tuple
    cols: tuple
    data: np.ndarray
    window_id: int = 0
    start: float = None
    end: float = None

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ContractError("Feature matrix must be 2-dimensional, got shape %s."
                                % (data.shape,))
        rows, cols = tuple(self.rows), tuple(self.cols)
        if data.shape != (len(rows), len(cols)):
            raise ContractError("Feature matrix shape %s does not match %d rows and %d columns."
                                % (data.shape, len(rows), len(cols)))
        if len(set(cols)) != len(cols):
            raise ContractError("Feature matrix column identifiers must be distinct.")
        data.flags.writeable = False
        object.__setattr__(self, 'data', data)
        object.__setattr__(self, 'rows', rows)
        object.__setattr__(self, 'cols', cols)

    @property
    def n(self):
        return len(self.cols)

    @property
    def M(self):
        return len(self.rows)

    def column_index(self):
        """Map of column identifier to column position."""
        return {col: i for i, col in enumerate(self.cols)}

    def select(self, indices):
        """Return a new window holding only the given column positions."""
        indices = np.asarray(indices, dtype=np.int64)
        return FeatureMatrix(self.rows, tuple(self.cols[i] for i in indices),
                             self.data[:, indices], self.window_id, self.start, self.end)


class AccessLogParser(object):
    """
    Parser for Apache common/combined log records.

    Malformed records are skipped and counted in 'skipped'. Blank
    lines are ignored and not counted.

    Attributes:
        strip_query (bool): drop the query string from request paths
        parsed (int): number of records turned into events
        skipped (int): number of malformed records
    """
    def __init__(self, strip_query=True, name='access_log'):
        self.strip_query = strip_query
        self.parsed = 0
        self.skipped = 0
        self.logger = logging.getLogger(name)

    def parse(self, line, line_num=None):
        """
        Parse one log record.

        Args:
            line (str): raw log record
            line_num (int): line number used in warnings

        Returns:
            Event: parsed event, or None if the record is blank or malformed
        """
        line = line.strip()
        if not line:
            return None

        match = LOG_REGEX.match(line)
        if match is None:
            return self._skip(line_num, "malformed record")

        request = match.group('request').split()
        if len(request) < 2:
            return self._skip(line_num, "missing request token")

        path = request[1]
        if self.strip_query:
            path = path.split('?', 1)[0]
        if not path:
            return self._skip(line_num, "empty request path")

        try:
            stamp = datetime.strptime(match.group('time'), LOG_TIME_FORMAT)
        except ValueError:
            return self._skip(line_num, "unparseable timestamp '%s'" % match.group('time'))

        self.parsed += 1
        return Event(int(stamp.timestamp()), match.group('host'), path, 1.0)

    def read(self, path):
        """
        Generate events from a log file, in file order.

        Raises:
            OSError: the file cannot be opened
        """
        with open(path, 'r', encoding='utf-8', errors='replace') as log_file:
            for line_num, line in enumerate(log_file, start=1):
                event = self.parse(line, line_num)
                if event is not None:
                    yield event

    def _skip(self, line_num, reason):
        self.skipped += 1
        self.logger.debug("Skipping line %s: %s." % (line_num, reason))
        return None


def parse_access_log(line, strip_query=True):
    """Parse a single access log record. Returns an Event or None."""
    return AccessLogParser(strip_query).parse(line)


class PriceCsvReader(object):
    """
    Reader for daily price CSV files with a header holding 'date' and 'close'
    columns (case insensitive) and optionally 'symbol'. Without a symbol column
    the file name stem is the symbol.

    Rows with a missing or nonpositive close, or an unparseable date, are
    skipped and counted in 'skipped'.
    """
    def __init__(self, name='price_csv'):
        self.parsed = 0
        self.skipped = 0
        self.logger = logging.getLogger(name)

    def read(self, path):
        """
        Read all price events of a file.

        Returns:
            list: Event objects with the trading date as feature and the close
                price as value

        Raises:
            IngestError: header missing or lacking a date or close column
            OSError: the file cannot be opened
        """
        basename = os.path.basename(path)
        file_symbol = os.path.splitext(basename)[0]
        events = []

        with open(path, 'r', newline='', encoding='utf-8-sig') as csv_file:
            reader = csv.DictReader(csv_file)
            if not reader.fieldnames:
                raise IngestError("%s has no header row" % basename)

            fields = {name.strip().lower(): name for name in reader.fieldnames if name}
            if 'date' not in fields or 'close' not in fields:
                raise IngestError("%s header lacks a 'date' or 'close' column" % basename)
            symbol_field = fields.get('symbol')

            for line_num, row in enumerate(reader, start=2):
                symbol = (row.get(symbol_field) or '').strip() if symbol_field else file_symbol
                date_str = (row.get(fields['date']) or '').strip()
                try:
                    close = float(row.get(fields['close']))
                except (TypeError, ValueError):
                    close = None

                if not symbol or close is None or not math.isfinite(close) or close <= 0:
                    self._skip(basename, line_num, "missing or nonpositive close")
                    continue
                try:
                    stamp = _date_to_epoch(date_str)
                except ValueError:
                    self._skip(basename, line_num, "unparseable date '%s'" % date_str)
                    continue

                self.parsed += 1
                events.append(Event(stamp, symbol, date_str, close))

        return events

    def _skip(self, basename, line_num, reason):
        self.skipped += 1
        self.logger.debug("Skipping %s line %s: %s." % (basename, line_num, reason))


def parse_price_csv(path):
    """Read a price CSV file into a list of events. See PriceCsvReader."""
    return PriceCsvReader().read(path)


def _date_to_epoch(date_str):
    stamp = datetime.strptime(date_str, PRICE_DATE_FORMAT).replace(tzinfo=timezone.utc)
    return int(stamp.timestamp())


def build_count_matrix(events, window_id=0, min_entities=2, start=None, end=None):
    """
    Aggregate events into a feature matrix by summing values per
    (feature, entity). Rows and columns are sorted, so the result does not
    depend on event order.

    Returns:
        FeatureMatrix: the window, or None if it has fewer than 'min_entities'
            columns or fewer than 2 rows
    """
    counts = defaultdict(float)
    for event in events:
        counts[(event.feature, event.entity)] += event.value

    rows = sorted({feature for feature, _ in counts})
    cols = sorted({entity for _, entity in counts})
    if len(cols) < min_entities or len(rows) < 2:
        return None

    row_index = {row: i for i, row in enumerate(rows)}
    col_index = {col: j for j, col in enumerate(cols)}
    data = np.zeros((len(rows), len(cols)))
    for (feature, entity), value in counts.items():
        data[row_index[feature], col_index[entity]] = value

    return FeatureMatrix(tuple(rows), tuple(cols), data, window_id, start, end)


def price_changes(prices):
    """
    Day-over-day changes in percent, 100 * (p[i+1] - p[i]) / p[i].

    Returns:
        numpy.ndarray: the L-1 changes, or None if fewer than two prices are
            given or a divisor price is not positive
    """
    prices = np.asarray(prices, dtype=np.float64)
    if prices.ndim != 1 or prices.size < 2 or np.any(prices[:-1] <= 0):
        return None
    return 100.0 * (prices[1:] - prices[:-1]) / prices[:-1]


def build_price_change_matrix(days, series, window_id=0, min_entities=2, start=None, end=None):
    """
    Build the price change matrix of a window of trading days.

    Symbols with a missing day or a nonpositive price inside the window are
    dropped for that window.

    Args:
        days (list): ordered trading dates of the window
        series (dict): symbol -> {date: close price}

    Returns:
        FeatureMatrix: rows are days[1:], columns are the kept symbols sorted;
            None if fewer than 'min_entities' symbols survive or fewer than two
            changes exist
    """
    if len(days) < 3:
        return None

    cols = []
    columns = []
    for symbol in sorted(series):
        prices = series[symbol]
        if any(day not in prices for day in days):
            continue
        changes = price_changes([prices[day] for day in days])
        if changes is None:
            continue
        cols.append(symbol)
        columns.append(changes)

    if len(cols) < min_entities:
        return None

    return FeatureMatrix(tuple(days[1:]), tuple(cols), np.column_stack(columns),
                         window_id, start, end)


class WindowSlider(object):
    """
    Turns an event stream into the sequence of window feature matrices.

    Access log windows are [t0 + k*step, t0 + k*step + length) where t0 is the
    first event timestamp. A window is emitted once the largest timestamp seen
    reaches its end plus 'max_delay', or at end of stream if the stream reaches
    the window's last second. Events older than the start of the oldest pending
    window are dropped and counted in 'late'.

    Price windows cover the trading days [k*step, k*step + length) of the sorted
    distinct dates in the stream.

    Attributes:
        late (int): events dropped for arriving too late
        skipped (int): windows skipped for too few entities or features
        emitted (int): windows yielded
    """
    def __init__(self, spec, name='windows'):
        self.spec = spec
        self.late = 0
        self.skipped = 0
        self.emitted = 0
        self.logger = logging.getLogger(name)

    def slide(self, events, kind='access_log'):
        """Generate the windows of a stream of the given kind."""
        if kind == 'access_log':
            return self.slide_events(events)
        elif kind == 'price_csv':
            return self.slide_prices(events)
        raise ConfigError("Unsupported stream kind '%s'." % kind)

    def slide_events(self, events):
        spec = self.spec
        buffer = []
        origin = None
        watermark = None
        k = 0

        for event in events:
            if origin is None:
                origin = watermark = event.timestamp
            if event.timestamp < origin + k * spec.step:
                self.late += 1
                continue
            buffer.append(event)
            watermark = max(watermark, event.timestamp)

            while watermark >= origin + k * spec.step + spec.length + spec.max_delay:
                window = self._close(buffer, origin, k)
                if window is not None:
                    yield window
                k += 1
                buffer = [e for e in buffer if e.timestamp >= origin + k * spec.step]

        if origin is None:
            return

        # end of stream: flush windows reaching their final second
        while watermark >= origin + k * spec.step + spec.length - 1:
            window = self._close(buffer, origin, k)
            if window is not None:
                yield window
            k += 1
            buffer = [e for e in buffer if e.timestamp >= origin + k * spec.step]

        if self.late:
            self.logger.warning("Dropped %d late events." % self.late)

    def slide_prices(self, events):
        spec = self.spec
        series = defaultdict(dict)
        stamps = {}
        for event in events:
            series[event.entity][event.feature] = event.value
            stamps[event.feature] = event.timestamp

        days = sorted(stamps)
        k = 0
        while k * spec.step + spec.length <= len(days):
            window_days = days[k * spec.step:k * spec.step + spec.length]
            window = build_price_change_matrix(window_days, series, k, spec.min_entities,
                                               stamps[window_days[0]],
                                               stamps[window_days[-1]] + 86400)
            if window is None:
                self.skipped += 1
                self.logger.debug("Skipping window %d: too few complete symbols." % k)
            else:
                self.emitted += 1
                yield window
            k += 1

    def _close(self, buffer, origin, k):
        start = origin + k * self.spec.step
        end = start + self.spec.length
        window = build_count_matrix((e for e in buffer if e.timestamp < end), k,
                                    self.spec.min_entities, start, end)
        if window is None:
            self.skipped += 1
            self.logger.debug("Skipping window %d: too few entities or features." % k)
        else:
            self.emitted += 1
        return window


def slide_windows(events, spec, kind='access_log'):
    """Generate the window feature matrices of an event stream."""
    return WindowSlider(spec).slide(events, kind)


def slide_price_windows(events, spec):
    """Generate the price change windows of a price event stream."""
    return WindowSlider(spec).slide_prices(events)
