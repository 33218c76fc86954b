from __future__ import annotations

import logging
import time

import httpx

from .exceptions import MalformedResponseError, TransportError

log = logging.getLogger(__name__)

RETRY_STATUS = {408, 429, 500, 502, 503, 504}


def post_json(client: httpx.Client, url: str, payload: dict, *, attempts: int = 3,
              backoff: float = 0.5, timeout: float | None = None, sleep=time.sleep) -> dict:
    """POST ``payload`` and decode a JSON object reply.

    Connection failures and retryable statuses are retried with exponential
    backoff; other 4xx statuses fail immediately.
    """
    last = "no attempt made"
    for attempt in range(1, attempts + 1):
        try:
            resp = client.post(url, json=payload, timeout=timeout)
        except httpx.HTTPError as exc:
            last = f"{type(exc).__name__}: {exc}"
        else:
            if resp.status_code < 400:
                try:
                    body = resp.json()
                except ValueError:
                    raise MalformedResponseError(f"{url} returned non-JSON body", attempts=attempt) from None
                if not isinstance(body, dict):
                    raise MalformedResponseError(f"{url} returned JSON {type(body).__name__}, expected object",
                                                 attempts=attempt)
                return body
            last = f"HTTP {resp.status_code}"
            if resp.status_code not in RETRY_STATUS:
                raise TransportError(f"POST {url} failed: {last}", attempts=attempt)
        if attempt < attempts:
            delay = backoff * 2 ** (attempt - 1)
            log.warning("POST %s failed (%s), retry %d/%d in %.2fs", url, last, attempt, attempts - 1, delay)
            if delay > 0:
                sleep(delay)
    raise TransportError(f"POST {url} failed after {attempts} attempts: {last}", attempts=attempts)
