import pytest

from clsc.hierarchy import TypeHierarchy


@pytest.fixture
def person_hierarchy():
    return TypeHierarchy.from_paths(
        [
            "/person",
            "/person/artist",
            "/person/teacher",
            "/org",
            "/org/company",
            "/org/company/broadcast",
        ]
    )
