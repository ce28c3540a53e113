import csv
import hashlib
import io
import json
import os
from datetime import datetime, timezone

from nanome.util import Logs

from . import __version__
from .omcore import REDUCTION_CONVENTION
from .utils import atomic_write, to_jsonable


MANIFEST_NAME = 'run-manifest.json'


def render_json(payload):
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2) + '\n'


def render_csv(header, rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


class OutputManager:
    """Writes the artifacts of one command under out_dir and keeps track of them for the manifest.

    Every write goes through a temp file and a rename, so a failed run never leaves a half-written artifact.
    """

    def __init__(self, out_dir, formats=('json', 'csv'), command=None, config=None):
        self.out_dir = out_dir
        self.formats = tuple(formats)
        self.command = command
        self.config = config or {}
        self.started_at = datetime.now(timezone.utc)
        self._artifacts = {}

    def wants(self, fmt):
        return fmt in self.formats

    def path(self, name):
        return os.path.join(self.out_dir, name)

    @property
    def artifacts(self):
        return dict(self._artifacts)

    def write_text(self, name, text):
        if not isinstance(text, str):
            raise TypeError(f'write_text() expected str, received {type(text)}')
        path = atomic_write(self.path(name), text)
        self._artifacts[name] = hashlib.sha256(text.encode('utf-8')).hexdigest()
        Logs.debug(f'Wrote {path}', extra={'artifact': name, 'bytes': len(text)})
        return path

    def write_json(self, name, payload):
        return self.write_text(name, render_json(payload))

    def write_csv(self, name, header, rows):
        return self.write_text(name, render_csv(header, rows))

    def write_svg(self, name, svg):
        if not self.wants('svg'):
            return None
        return self.write_text(name, svg)

    def write_manifest(self):
        manifest = {
            'version': __version__,
            'command': self.command,
            'reduction': REDUCTION_CONVENTION,
            'config': self.config,
            'artifacts': [{'name': name, 'sha256': digest} for name, digest in sorted(self._artifacts.items())],
            'started_at': self.started_at.isoformat(),
            'finished_at': datetime.now(timezone.utc).isoformat(),
        }
        # The manifest is the only artifact with timestamps, it is not listed in itself
        return atomic_write(self.path(MANIFEST_NAME), render_json(manifest))
