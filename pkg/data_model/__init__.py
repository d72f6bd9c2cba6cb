"""
Determines what database backs the result store
the database class MUST be registered here in `databases`
and MUST expose functions:
    insert_run(config, label=None)
    retrieve_run(uid)
    delete_run(uid)
    most_recent_runs(limit=3)
    insert_rows(run_uid, rows)
    retrieve_rows(run_uid)

The backend is only resolved when the store is actually used, so the library and the
command line work without EHRELAY_DATABASE set.
"""
from os import environ

from ehrelay.errors import ConfigError

from .base_model import BaseDBSession
from .sqlite_model import Sqlite3DBSession

databases = {
        'Sqlite3': Sqlite3DBSession,
}


def get_database() -> BaseDBSession:
    database = environ.get('EHRELAY_DATABASE', None)
    if database is None:
        raise ConfigError('env var EHRELAY_DATABASE not set')

    Database = databases.get(database)
    if Database is None:
        raise ConfigError(f'{database} is not a valid database name, must be one of: '
                          + ', '.join(databases.keys()))

    assert issubclass(Database, BaseDBSession)
    return Database()
