#!/usr/bin/env python

#stdlib imports
import os.path
import sys
import tempfile
import shutil
import time

#third party imports
import numpy as np
import pandas as pd

#hack the path so that I can debug these functions if I need to
homedir = os.path.dirname(os.path.abspath(__file__)) #where is this script?
regionflowdir = os.path.abspath(os.path.join(homedir,'..'))
sys.path.insert(0,regionflowdir) #put this at the front of the system path, ignoring any installed regionflow stuff

from regionflow.dataset import RegionFlowException
from regionflow.flows import HospitalRoster,FlowTable
from regionflow.network import buildNetwork
from regionflow.louvain import Partition,runLouvain
from regionflow.scale import cutToK
from regionflow.geometry import ZoneGeometry,ZoneAttributes,zoneAdjacency
from regionflow.metrics import localizationIndex,partitionAgreement
from regionflow.synth import PlantedSpec,generatePlanted

def test_invalid_spec():
    print('Testing planted spec validation...')
    badspecs = [dict(regions=0),
                dict(regions=1,zones=1),
                dict(lam=0.0),
                dict(leakage=1.0),
                dict(leakage=-0.1),
                dict(hospitals=0),
                dict(zones=3,hospitals=4),
                dict(seed=-1),
                dict(regions=2.5),
                dict(specialized=1.5)]
    for kwargs in badspecs:
        try:
            PlantedSpec(**kwargs)
            assert 1 == 0
        except RegionFlowException as rfe:
            assert rfe.code == 'invalid_spec'
            assert len(rfe.details['problems']) >= 1
    spec = PlantedSpec(regions=1,zones=2,hospitals=2)
    assert spec.asDict()['regions'] == 1
    print('Passed.')

def test_structure():
    print('Testing the layout of a planted data set...')
    spec = PlantedSpec(regions=4,zones=6,lam=20.0,leakage=0.2,hospitals=3,seed=5)
    data = generatePlanted(spec)
    zones = data.attrs.getZones()
    assert len(zones) == 24
    assert zones[0] == 'Z00001'
    assert data.truth.getCommunityCount() == 4
    assert len(data.roster.getData()) == 12
    homezones = data.roster.getHomeZones()
    for hospital,zone in homezones.items():
        region = (int(hospital[1:]) - 1)//3
        assert data.truth.getLabel(zone) == region
    totals = data.flows.groupby('hospital_id')['count'].sum()
    admissions = data.roster.getData().set_index('hospital_id')['admissions']
    assert (admissions.reindex(totals.index) == totals).all()
    assert (data.flows['count'] >= 1).all()

    #every planted region is a contiguous block of unit cells
    adj = zoneAdjacency(data.geoms)
    for community in data.truth.getCommunities():
        members = set(community)
        seen = set([community[0]])
        stack = [community[0]]
        while stack:
            zone = stack.pop()
            for other in adj.getNeighbors(zone):
                if other in members and other not in seen:
                    seen.add(other)
                    stack.append(other)
        assert seen == members
        for zone in community:
            assert data.geoms.getArea(zone) == 1.0
    print('Passed.')

def test_determinism():
    print('Testing that a seed fixes the data set...')
    spec = PlantedSpec(regions=3,zones=5,seed=11)
    first = generatePlanted(spec)
    second = generatePlanted(PlantedSpec(regions=3,zones=5,seed=11))
    pd.testing.assert_frame_equal(first.flows,second.flows)
    pd.testing.assert_frame_equal(first.attrs.getData(),second.attrs.getData())
    assert first.truth == second.truth
    other = generatePlanted(PlantedSpec(regions=3,zones=5,seed=12))
    assert not first.flows.equals(other.flows)
    print('Passed.')

def test_no_leakage():
    print('Testing a data set without leakage...')
    data = generatePlanted(PlantedSpec(regions=4,zones=5,leakage=0.0,seed=3))
    table = data.getFlowTable()
    li = localizationIndex(table,data.truth,data.roster)
    assert (li == 1.0).all()
    single = generatePlanted(PlantedSpec(regions=1,zones=4,leakage=0.5,seed=3))
    li = localizationIndex(single.getFlowTable(),single.truth,single.roster)
    assert li.tolist() == [1.0]
    print('Passed.')

def test_specialized():
    print('Testing specialized-care flows...')
    data = generatePlanted(PlantedSpec(regions=2,zones=4,specialized=0.3,seed=8))
    table = data.getFlowTable()
    classes = set(table.getData()['service_class'])
    assert classes == set(['G','S'])
    special = table.filterSpecialized()
    assert set(special.getData()['service_class']) == set(['S'])
    assert 0 < special.getTotal() < table.getTotal()
    none = generatePlanted(PlantedSpec(regions=2,zones=4,specialized=0.0,seed=8))
    assert set(none.flows['service_class']) == set(['G'])
    print('Passed.')

def test_recovery():
    print('Testing recovery of twenty planted regions...')
    t1 = time.time()
    data = generatePlanted(PlantedSpec(regions=20,zones=50,lam=40.0,leakage=0.1,seed=7))
    net = buildNetwork(data.getFlowTable(),roster=data.roster)
    d = runLouvain(net)
    t2 = time.time()
    print('Generation and detection took %.2f seconds' % (t2-t1))
    assert t2 - t1 < 5
    cut = cutToK(net,d,20)
    assert cut.partition.getCommunityCount() == 20
    assert partitionAgreement(cut.partition,data.truth) >= 0.95
    print('Passed.')

def test_million_rows():
    print('Testing ingest and detection of a million flow rows...')
    data = generatePlanted(PlantedSpec(regions=20,zones=50,lam=1000.0,leakage=0.1,seed=3))
    #one row per admission
    rows = data.flows.loc[data.flows.index.repeat(data.flows['count'])].assign(count=1)
    assert len(rows) > 900000
    tdir = tempfile.mkdtemp()
    try:
        flowfile = os.path.join(tdir,'flows.csv')
        rows.to_csv(flowfile,index=False)
        t1 = time.time()
        table = FlowTable.loadFromCSV(flowfile,roster=data.roster,chunksize=100000,workers=4)
        t2 = time.time()
        net = buildNetwork(table,roster=data.roster)
        d = runLouvain(net)
        t3 = time.time()
        print('Ingest took %.2f seconds, ingest and detect %.2f seconds' % (t2-t1,t3-t1))
        assert table.getStats()['retained_records'] == len(rows)
        assert table.getTotal() == len(rows)
        assert len(net) == 1000
        assert len(d) >= 1
        assert t3 - t1 < 60
    finally:
        shutil.rmtree(tdir)
    print('Passed.')

def test_scale_localization():
    print('Testing localization at the planted scale and at a finer scale...')
    data = generatePlanted(PlantedSpec(regions=5,zones=20,lam=40.0,leakage=0.1,seed=4))
    table = data.getFlowTable()
    net = buildNetwork(table,roster=data.roster)
    d = runLouvain(net)
    coarse = cutToK(net,d,5)
    fine = cutToK(net,d,20)
    licoarse = localizationIndex(table,coarse.partition,data.roster).mean()
    lifine = localizationIndex(table,fine.partition,data.roster).mean()
    assert licoarse > lifine
    print('Passed.')

def test_save():
    print('Testing writing a planted data set to disk...')
    data = generatePlanted(PlantedSpec(regions=3,zones=4,seed=9))
    tdir = tempfile.mkdtemp()
    try:
        files = data.save(tdir,comment='regionflow synth seed 9',metadata={'seed':9})
        assert list(files.keys()) == ['flows','roster','attrs','truth','geoms']
        for filename in files.values():
            assert os.path.isfile(filename)
        roster = HospitalRoster.loadFromCSV(files['roster'])
        attrs = ZoneAttributes.loadFromCSV(files['attrs'])
        table = FlowTable.loadFromCSV(files['flows'],roster=roster,universe=set(attrs.getZones()))
        assert table.getTotal() == data.getFlowTable().getTotal()
        assert Partition.load(files['truth']).sameStructure(data.truth)
        geoms = ZoneGeometry.loadFromGeoJSON(files['geoms'])
        assert geoms.getZones() == data.geoms.getZones()
        np.testing.assert_almost_equal(attrs.getPopulation().values,data.attrs.getPopulation().values)
    finally:
        shutil.rmtree(tdir)
    print('Passed.')

if __name__ == '__main__':
    test_invalid_spec()
    test_structure()
    test_determinism()
    test_no_leakage()
    test_specialized()
    test_recovery()
    test_million_rows()
    test_scale_localization()
    test_save()
