import pytest

from lexlink.corpus import AliasEntry, AliasTable, EntityRecord, KnowledgeBase


@pytest.fixture
def fruit_kb() -> KnowledgeBase:
    return KnowledgeBase(
        [
            EntityRecord(id="Q1", name="Apple", description="fruit of the apple tree"),
            EntityRecord(id="Q2", name="Apple", description="technology company from cupertino"),
            EntityRecord(id="Q3", name="Banana", description="yellow tropical fruit"),
        ]
    )


@pytest.fixture
def fruit_aliases() -> AliasTable:
    return AliasTable(
        [
            AliasEntry(alias="Apple", entity_id="Q1", prior=0.3),
            AliasEntry(alias="Apple", entity_id="Q2", prior=0.7),
            AliasEntry(alias="BigA", entity_id="Q2", prior=0.7),
            AliasEntry(alias="BigA", entity_id="Q1", prior=0.3),
            AliasEntry(alias="Banana", entity_id="Q3", prior=1.0),
        ]
    )
