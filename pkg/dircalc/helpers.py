"""Console helpers for DirCalc."""

import time

import numpy as np

from datetime import timedelta as td


class OneLineProgress():
    """Displays a progress bar in one line.

    Parameters
    ----------
    total : int
        Number of steps to completion.

    msg : str, optional
        Label printed before the bar. Defaults to ''.

    show_etr : bool, optional
        Whether to print the estimated time remaining. Defaults to True.
    """

    def __init__(self, total, msg='', show_etr=True):
        self.total = max(total, 1)
        self.msg = msg
        self.count = 0
        self.show_etr = show_etr
        self._start = time.time()
        self._spinner = 0
        self.display()


    def increment(self):
        """Advances the counter by one step without redrawing."""
        self.count += 1


    def display(self):
        """Redraws the bar, then advances the counter by one step."""

        perc = min(self.count/self.total*100.0, 100.0)
        self.increment()

        # Bar
        filled = int(perc//10)
        s = '\r' + self.msg + ' '*4
        if perc < 100.0:
            s += u'Ξ'*filled + '-\\|/'[self._spinner%4] + '-'*(9-filled)
            self._spinner += 1
        else:
            s += u'Ξ'*10
        s += ' '*4 + '{:7.3f}%'.format(perc)

        # Time remaining
        if self.show_etr:
            elapsed = time.time()-self._start
            if perc >= 100.0:
                s += ' '*4 + 'Run Time {0}'.format(td(seconds=elapsed))
            elif perc > 0.0:
                s += ' '*4 + 'ETR = {0}'.format(td(seconds=elapsed/perc*100.0-elapsed))
            else:
                s += ' '*4 + 'ETR = -:--:--'

        if perc >= 100.0:
            s += '\n'
        print(s, end='', flush=True)


def to_jsonable(obj):
    """Recursively converts numpy scalars and arrays to plain Python objects for json.dump."""
    if isinstance(obj, dict):
        return {str(key) : to_jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj
