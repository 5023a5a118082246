"""Black-box objective living in a child process.

Line protocol on the child's stdin/stdout, one exchange per query::

    -> EVAL <x_1> <x_2> ... <x_d>
    <- VAL <value>
    -> END            (child must then exit with status 0)

Numbers use Python's shortest round-trip ``repr``.
"""

from __future__ import annotations

import logging
import math
import shlex
import subprocess
from typing import Sequence, Union

import numpy as np

from twopoint.estimators import OracleError

log = logging.getLogger("twopoint.external")


class ProtocolError(OracleError):
    def __init__(self, message: str, request: str = "", response: str = "", point=None):
        super().__init__(message, point)
        self.request = request
        self.response = response


def format_request(x) -> str:
    return "EVAL " + " ".join(repr(float(c)) for c in x) + "\n"


def parse_response(line: str) -> float:
    parts = line.split()
    if len(parts) != 2 or parts[0] != "VAL":
        raise ValueError(f"malformed response {line!r}")
    v = float(parts[1])
    if not math.isfinite(v):
        raise ValueError(f"non-finite value {parts[1]!r}")
    return v


class ExternalObjective:
    """Callable that forwards each evaluation to a child process."""

    def __init__(self, command: Union[str, Sequence[str]], timeout: float = 30.0):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.argv = argv
        self.timeout = timeout
        self.requests = 0
        self.proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
        )

    def __call__(self, x) -> float:
        request = format_request(x)
        self.requests += 1
        try:
            self.proc.stdin.write(request)
            self.proc.stdin.flush()
            response = self.proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"child unavailable: {exc}", request.strip(), "", x) from exc
        log.debug("-> %s", request.strip())
        log.debug("<- %s", response.strip())
        if not response:
            code = self.proc.poll()
            raise ProtocolError(f"child closed its output (exit status {code})", request.strip(), "", x)
        try:
            return parse_response(response)
        except ValueError as exc:
            raise ProtocolError(str(exc), request.strip(), response.strip(), x) from exc

    def close(self) -> int:
        """Send ``END`` and wait; raises :class:`ProtocolError` unless the child exits 0."""
        if self.proc.poll() is None:
            try:
                self.proc.stdin.write("END\n")
                self.proc.stdin.flush()
                self.proc.stdin.close()
            except (BrokenPipeError, OSError):
                pass
            try:
                self.proc.wait(timeout=self.timeout)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()
                raise ProtocolError("child did not exit after END", "END")
        self.proc.stdout.close()
        code = self.proc.returncode
        if code != 0:
            raise ProtocolError(f"child exited with status {code}", "END")
        return code

    def kill(self) -> None:
        if self.proc.poll() is None:
            self.proc.kill()
            self.proc.wait()
        for stream in (self.proc.stdin, self.proc.stdout):
            try:
                stream.close()
            except (BrokenPipeError, OSError):
                pass


def serve(fn, stdin, stdout) -> int:
    """Run the child side of the protocol for a Python callable ``fn``."""
    for line in stdin:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "END":
            return 0
        if parts[0] != "EVAL":
            return 1
        x = np.array([float(p) for p in parts[1:]])
        stdout.write(f"VAL {float(fn(x))!r}\n")
        stdout.flush()
    return 0
