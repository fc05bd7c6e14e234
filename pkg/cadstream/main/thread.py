# -*- coding: utf-8 -*-
"""
Worker threads for window processing.

A batch of materialized windows is independent work. ThreadPool spreads it
over a fixed number of threads and hands the results back in window order.
The numeric kernels (BLAS, scipy, numba) drop the GIL, so threads overlap on
them.
"""
import logging
import signal
import threading
from queue import Queue, Empty

from cadstream.main.errors import ThreadInterruptError

logger = logging.getLogger('thread')


class ThreadPool():
    """
    Fixed size pool running process(task, interrupt) for every task of a batch.

    Use it as a context manager: on entry from the main thread, SIGINT sets
    the 'interrupt' event instead of raising KeyboardInterrupt, and workers
    stop taking new windows. The previous handler is restored on exit.

    Attributes:
        workers (list): the worker threading.Thread objects
        results (list): one slot per task in task order; None for a task that
            raised or was skipped after an interrupt
        task_queue (queue.Queue): pending (position, task) pairs
        interrupt (threading.Event): set once SIGINT is received
    """
    def __init__(self, tasks, process, num_threads=1):
        """
        Args:
            tasks (list): windows to process, as FeatureMatrix objects or
                (FeatureMatrix, CorrelationMatrix) pairs
            process (callable): process(task, interrupt) -> result
            num_threads (int): worker thread count, at least 1

        Raises:
            AssertionError: num_threads < 1.
        """
        assert num_threads > 0, "Number of threads must be > 0"

        self.process = process
        self.results = [None] * len(tasks)
        self.interrupt = threading.Event()
        self.task_queue = Queue()
        for position, task in enumerate(tasks):
            self.task_queue.put((position, task))

        self.workers = [threading.Thread(target=self._worker, name='window-worker-%d' % i)
                        for i in range(min(num_threads, max(len(tasks), 1)))]
        self._saved_handler = None

    def execute_threads(self):
        """Start the workers and block until every task is taken and done."""
        for worker in self.workers:
            worker.start()
        self.task_queue.join()
        for worker in self.workers:
            worker.join()

    def get_results(self):
        """Return a copy of the results, indexed like the input tasks."""
        return self.results[:]

    def _on_sigint(self, signum, frame):
        self.interrupt.set()
        logger.error("Interrupt signal %s caught, finishing windows in progress." % signum)

    def _worker(self):
        while True:
            try:
                position, task = self.task_queue.get(block=False)
            except Empty:
                return

            try:
                if not self.interrupt.is_set():
                    self.results[position] = self.process(task, self.interrupt)
            except ThreadInterruptError:
                pass
            except Exception as e:
                logger.error("Window task %s failed with %s exception: %s."
                             % (position, type(e).__name__, e))
            finally:
                self.task_queue.task_done()

    def __enter__(self):
        # handlers can only be installed from the main thread
        if threading.current_thread() is threading.main_thread():
            self._saved_handler = signal.signal(signal.SIGINT, self._on_sigint)
        return self

    def __exit__(self, exc_type, exc_value, tb):
        if self._saved_handler is not None:
            signal.signal(signal.SIGINT, self._saved_handler)
            self._saved_handler = None
