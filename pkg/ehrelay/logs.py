"""
Logging for ehrelay.

Set EHRELAY_DEBUG to any non-empty value to get a rotating debug.log in the working
directory. Warnings that users must see regardless go through the 'ehrelay' logger.
"""
import logging
import os

from logging.handlers import RotatingFileHandler


DEBUG_LOG_FILE = 'debug.log'
DEBUG_LOG_MAX_BYTES = 1 * 1024 * 1024  # 1 MB
DEBUG_LOG_BACKUPS = 3

debug = os.environ.get('EHRELAY_DEBUG')
logger = logging.getLogger('ehrelay')

if debug:
    debug_logger = logging.getLogger('debugLogger')
    debug_logger.setLevel(logging.DEBUG)

    handler = RotatingFileHandler(DEBUG_LOG_FILE, maxBytes=DEBUG_LOG_MAX_BYTES,
                                  backupCount=DEBUG_LOG_BACKUPS)
    handler.setFormatter(logging.Formatter('%(asctime)s - %(message)s'))
    debug_logger.addHandler(handler)

    def log_debug(message):
        debug_logger.debug(message)
else:
    # no-op when debugging is off
    def log_debug(message):
        pass


def log_warning(message):
    logger.warning(message)


def attach_stderr_handler(level=logging.WARNING):
    """ used by the command line so library warnings reach the terminal """
    if any(getattr(h, '_ehrelay_cli', False) for h in logger.handlers):
        return
    stream_handler = logging.StreamHandler()
    stream_handler.setFormatter(logging.Formatter('%(levelname)s: %(message)s'))
    stream_handler.setLevel(level)
    stream_handler._ehrelay_cli = True
    logger.addHandler(stream_handler)
