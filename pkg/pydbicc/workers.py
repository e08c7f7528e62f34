import logging

from joblib import Parallel, delayed

__all__ = ['ReplicateRunner']

logger = logging.getLogger(__name__)


class ReplicateRunner(object):
    """Runs independent replicate tasks, optionally on a pool of threads.

    Every task must carry everything it needs (its own seed or generator);
    tasks share only read-only inputs such as a DistanceMatrix. Results come
    back in task order, so the output is identical whatever the number of
    threads. There are two ways to use it:
     - runner.map(func, tasks) for a one-off batch
     - with ReplicateRunner(4) as runner: ... to reuse one set of worker
         threads for several batches (they are released on exit)

    A runner with threads <= 1 never starts workers and calls func inline,
    which is also what you want under a debugger."""
    def __init__(self, threads = 1, chunksize = None, label = None):
        """Create a runner.

        Arguments are:
         threads: upper bound on worker threads; values <= 1 run serially
         chunksize: tasks handed to a worker at a time. Defaults to joblib's
            automatic batching
         label: name used in progress log messages"""
        self.threads = max(1, int(threads or 1))
        self.chunksize = chunksize
        self.label = label or 'replicates'
        self._parallel = None

    def _new_parallel(self):
        return Parallel(n_jobs = self.threads, prefer = 'threads', batch_size = self.chunksize or 'auto')

    def __enter__(self):
        if self.threads > 1:
            self._parallel = self._new_parallel()
            self._parallel.__enter__()
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    def close(self):
        if self._parallel is not None:
            self._parallel.__exit__(None, None, None)
            self._parallel = None

    def map(self, func, tasks):
        """Applies func to each task and returns the results in task order"""
        tasks = list(tasks)
        logger.debug('running %d %s on %d thread(s)', len(tasks), self.label, self.threads)
        if self.threads <= 1 or len(tasks) <= 1:
            return [func(task) for task in tasks]
        parallel = self._parallel or self._new_parallel()
        return list(parallel(delayed(func)(task) for task in tasks))
