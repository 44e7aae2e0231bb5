from __future__ import annotations

import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from cris.schema import bundled_cerif_schema, closure, load_schema

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def bundled_triples():
    return bundled_cerif_schema()


@pytest.fixture(scope="session")
def bundled_schema(bundled_triples):
    return load_schema(bundled_triples)


@pytest.fixture(scope="session")
def bundled_ct(bundled_schema):
    return closure(bundled_schema)


class FixtureSite:
    """Tiny threaded HTTP server serving an in-memory path->document map and
    logging request arrival times."""

    def __init__(self, files: dict[str, tuple[str, bytes]]):
        self.files = files
        self.requests: list[tuple[str, float]] = []
        self._log_lock = threading.Lock()
        site = self

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):  # noqa: N802 (http.server API)
                with site._log_lock:
                    site.requests.append((self.path, time.monotonic()))
                entry = site.files.get(self.path)
                if entry is None:
                    self.send_response(404)
                    self.send_header("Content-Type", "text/plain")
                    self.end_headers()
                    self.wfile.write(b"not found")
                    return
                content_type, body = entry
                self.send_response(200)
                self.send_header("Content-Type", content_type)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def url(self, path: str) -> str:
        return self.base_url + path

    def times_for(self, path_prefix: str = "") -> list[float]:
        with self._log_lock:
            return [t for path, t in self.requests if path.startswith(path_prefix)]

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def serve_site():
    """Factory fixture: serve_site({path: (content_type, bytes)}) -> FixtureSite."""
    servers: list[FixtureSite] = []

    def start(files: dict[str, tuple[str, bytes]]) -> FixtureSite:
        server = FixtureSite(files)
        servers.append(server)
        return server

    yield start
    for server in servers:
        server.stop()


def load_site_fixture() -> dict[str, tuple[str, bytes]]:
    """The bundled five-page site, read from tests/fixtures/site."""
    types = {".html": "text/html", ".nt": "text/plain"}
    files: dict[str, tuple[str, bytes]] = {}
    for path in (FIXTURES / "site").iterdir():
        files["/" + path.name] = (types[path.suffix], path.read_bytes())
    return files


@pytest.fixture
def site_server(serve_site):
    return serve_site(load_site_fixture())
