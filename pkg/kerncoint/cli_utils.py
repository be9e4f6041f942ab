# SPDX-License-Identifier: MIT

import contextlib
import re
import sys

from kerncoint.exceptions import InvalidArgumentError


# Accepts "-" (stdout), "fd:N", "path:PATH" or a plain path.
def open_file_from_cli(spec, *args, **kwargs):
    if spec == "-":
        return contextlib.nullcontext(sys.stdout)
    m = re.match(r"fd:(\d+)$", spec)
    if m is not None:
        kwargs.setdefault("closefd", False)
        return open(int(m.group(1)), *args, **kwargs)
    m = re.match(r"path:(.+)", spec)
    if m is not None:
        return open(m.group(1), *args, **kwargs)
    if not spec:
        raise InvalidArgumentError("Illegal file specification on CLI")
    return open(spec, *args, **kwargs)


def flag_name(key):
    return "--" + key.replace("_", "-")
