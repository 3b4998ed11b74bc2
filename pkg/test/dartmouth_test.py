#!/usr/bin/env python

#stdlib imports
from collections import deque
import os.path
import sys
import tempfile
import shutil
import json

#third party imports
import numpy as np
import pandas as pd

#hack the path so that I can debug these functions if I need to
homedir = os.path.dirname(os.path.abspath(__file__)) #where is this script?
regionflowdir = os.path.abspath(os.path.join(homedir,'..'))
sys.path.insert(0,regionflowdir) #put this at the front of the system path, ignoring any installed regionflow stuff

from regionflow.dataset import RegionFlowException
from regionflow.flows import FlowRecord,HospitalRoster,ingestFlows
from regionflow.louvain import Partition
from regionflow.geometry import ZoneAttributes
from regionflow.dartmouth import AdjacencyMap,BaselineFlags,pluralityAssign,enforceContiguity

def grid(nrows,ncols):
    """Zone ids and rook adjacency of a rectangular grid of cells.
    """
    zones = ['g%i%i' % (r,c) for r in range(nrows) for c in range(ncols)]
    pairs = []
    for r in range(nrows):
        for c in range(ncols):
            if c+1 < ncols:
                pairs.append(('g%i%i' % (r,c),'g%i%i' % (r,c+1)))
            if r+1 < nrows:
                pairs.append(('g%i%i' % (r,c),'g%i%i' % (r+1,c)))
    return zones,AdjacencyMap.fromPairs(pairs)

def connected(zones,adj):
    """Breadth-first check that a set of zones is one piece of the adjacency graph.
    """
    zones = set(zones)
    if len(zones) <= 1:
        return True
    start = sorted(zones)[0]
    seen = set([start])
    queue = deque([start])
    while queue:
        zone = queue.popleft()
        for other in adj.getNeighbors(zone):
            if other in zones and other not in seen:
                seen.add(other)
                queue.append(other)
    return seen == zones

def get_roster(homes):
    hospitals = sorted(homes.keys())
    return HospitalRoster(pd.DataFrame({'hospital_id':hospitals,
                                        'home_zone':[homes[h] for h in hospitals],
                                        'is_general':['true']*len(hospitals),
                                        'admissions':[0]*len(hospitals)}))

def test_adjacency():
    print('Testing adjacency maps...')
    adj = AdjacencyMap.fromPairs([('A','B'),('B','C')],zones=['A','B','C','D'])
    assert adj.getNeighbors('B') == set(['A','C'])
    assert adj.isIsland('D')
    assert adj.getPairs() == [('A','B'),('B','C')]
    assert adj.isContiguous(['A','B','C'])
    assert not adj.isContiguous(['A','C'])
    try:
        AdjacencyMap({'A':['B'],'B':[]})
        assert 1 == 0
    except RegionFlowException as rfe:
        assert rfe.code == 'bad_adjacency'
    try:
        AdjacencyMap({'A':['A']})
        assert 1 == 0
    except RegionFlowException as rfe:
        assert rfe.code == 'bad_adjacency'
    try:
        AdjacencyMap.fromPairs([('A','B'),('C','C')])
        assert 1 == 0
    except RegionFlowException as rfe:
        assert rfe.code == 'bad_adjacency'
    try:
        adj.getNeighbors('Q')
        assert 1 == 0
    except RegionFlowException as rfe:
        assert rfe.code == 'coverage_mismatch'
    tdir = tempfile.mkdtemp()
    try:
        filename = os.path.join(tdir,'adjacency.csv')
        adj.save(filename,comment='regionflow test')
        adj2 = AdjacencyMap.loadFromCSV(filename,zones=['D'])
        assert adj2 == adj
    finally:
        shutil.rmtree(tdir)
    print('Passed.')

def test_plurality():
    print('Testing the plurality rule...')
    roster = get_roster({'HA':'A','HB':'B'})
    records = [FlowRecord('A','HA',20,'G'),FlowRecord('B','HB',20,'G'),
               FlowRecord('C','HA',10,'G'),FlowRecord('C','HB',5,'G')]
    p,flags = pluralityAssign(ingestFlows(records,roster=roster),roster=roster)
    assert p.getNodes() == ['A','B','C']
    assert p.getLabel('C') == p.getLabel('A')
    assert p.getLabel('B') != p.getLabel('A')
    assert flags.ties == []
    assert flags.seeds[p.getLabel('B')] == 'B'

    #row order does not matter
    p2,flags2 = pluralityAssign(ingestFlows(list(reversed(records)),roster=roster),roster=roster)
    assert p2 == p

    print('Testing plurality ties...')
    records = [FlowRecord('A','HA',20,'G'),FlowRecord('B','HB',20,'G'),
               FlowRecord('C','HB',7,'G'),FlowRecord('C','HA',7,'G')]
    p,flags = pluralityAssign(ingestFlows(records,roster=roster),roster=roster)
    assert p.getLabel('C') == p.getLabel('A')
    assert flags.ties == ['C']

    print('Testing that several hospitals in one zone pool their admissions...')
    roster3 = get_roster({'HA':'A','HB':'B','HB2':'B'})
    records = [FlowRecord('A','HA',20,'G'),FlowRecord('B','HB',20,'G'),
               FlowRecord('C','HA',8,'G'),FlowRecord('C','HB',5,'G'),FlowRecord('C','HB2',4,'G')]
    p,flags = pluralityAssign(ingestFlows(records,roster=roster3),roster=roster3)
    assert p.getLabel('C') == p.getLabel('B')

    try:
        pluralityAssign(ingestFlows([],roster=roster),roster=roster)
        assert 1 == 0
    except RegionFlowException as rfe:
        assert rfe.code == 'empty_input'
    print('Passed.')

def test_no_flow():
    print('Testing zones without flow...')
    roster = get_roster({'HA':'A','HB':'B'})
    records = [FlowRecord('A','HA',20,'G'),FlowRecord('B','HB',20,'G'),FlowRecord('C','HA',3,'G')]
    table = ingestFlows(records,roster=roster)
    attrs = ZoneAttributes(pd.DataFrame({'zone_id':['A','B','C','D'],
                                         'population':[100,100,50,10],
                                         'centroid_x':[0.0,10.0,2.0,9.0],
                                         'centroid_y':[0.0,0.0,0.0,1.0]}))
    p,flags = pluralityAssign(table,roster=roster,attrs=attrs)
    assert p.getNodes() == ['A','B','C','D']
    assert p.getLabel('D') == p.getLabel('B')
    assert flags.no_flow == ['D']

    attrs = ZoneAttributes(pd.DataFrame({'zone_id':['A','B','C','D'],
                                         'population':[100,100,50,10],
                                         'centroid_x':[0.0,10.0,2.0,''],
                                         'centroid_y':[0.0,0.0,0.0,'']}))
    try:
        pluralityAssign(table,roster=roster,attrs=attrs)
        assert 1 == 0
    except RegionFlowException as rfe:
        assert rfe.code == 'missing_centroid'
        assert rfe.details['zones'] == ['D']

    #a hospital zone without residents anchors its own region
    records = [FlowRecord('A','HA',20,'G'),FlowRecord('C','HB',4,'G')]
    p,flags = pluralityAssign(ingestFlows(records,roster=roster),roster=roster)
    assert p.getLabel('B') == p.getLabel('C')
    assert flags.no_flow == ['B']
    print('Passed.')

def test_contiguous_unchanged():
    print('Testing that a contiguous partition is left alone...')
    zones,adj = grid(3,4)
    labels = dict([(z,0 if int(z[2]) < 2 else 1) for z in zones])
    p = Partition.fromDict(labels)
    roster = get_roster({'H0':'g00','H1':'g03'})
    table = ingestFlows([FlowRecord(z,'H%i' % labels[z],5,'G') for z in zones],roster=roster)
    p2,flags = enforceContiguity(p,adj,table,roster=roster)
    assert p2 == p
    assert len(flags.enclaves) == 0
    assert flags.unresolved == []
    print('Passed.')

def test_enclave():
    print('Testing that an enclave joins the region around it...')
    zones,adj = grid(3,4)
    labels = dict([(z,0 if int(z[2]) < 2 else 1) for z in zones])
    labels['g13'] = 0
    p = Partition.fromDict(labels)
    assert not connected([z for z in zones if labels[z] == 0],adj)
    roster = get_roster({'H0':'g00','H1':'g03'})
    records = [FlowRecord(z,'H%i' % labels[z],5,'G') for z in zones if z != 'g13']
    records += [FlowRecord('g13','H0',6,'G'),FlowRecord('g13','H1',2,'G')]
    table = ingestFlows(records,roster=roster)
    p2,flags = enforceContiguity(p,adj,table,roster=roster)
    assert p2.getLabel('g13') == p2.getLabel('g03')
    for community in p2.getCommunities():
        assert connected(community,adj)
    assert p2.getCommunityCount() == 2
    assert list(flags.enclaves.keys()) == ['g13']
    assert flags.enclaves['g13']['from'] == p.getLabel('g13')
    print('Passed.')

def test_flow_share():
    print('Testing the choice between neighboring regions...')
    zones,adj = grid(3,3)
    layout = {'g00':0,'g01':0,'g02':0,
              'g10':0,'g11':2,'g12':1,
              'g20':2,'g21':1,'g22':1}
    roster = get_roster({'H0':'g00','H1':'g22','H2':'g20'})
    base = [FlowRecord(z,'H%i' % layout[z],5,'G') for z in zones if z != 'g11']
    for toR0,toR1,expected in [(3,8,'g22'),(8,3,'g00'),(4,4,'g00')]:
        records = base + [FlowRecord('g11','H0',toR0,'G'),FlowRecord('g11','H1',toR1,'G'),
                          FlowRecord('g11','H2',1,'G')]
        table = ingestFlows(records,roster=roster)
        p = Partition.fromDict(layout)
        p2,flags = enforceContiguity(p,adj,table,roster=roster)
        assert p2.getLabel('g11') == p2.getLabel(expected)
        assert p2.getLabel('g20') != p2.getLabel('g11')
        for community in p2.getCommunities():
            assert connected(community,adj)
        assert p2.getCommunityCount() == 3
    print('Passed.')

def test_island():
    print('Testing that islands stay put and are flagged...')
    zones,adj = grid(2,2)
    adj = AdjacencyMap.fromPairs(adj.getPairs(),zones=zones + ['I'])
    layout = {'g00':0,'g01':0,'g10':1,'g11':1,'I':0}
    roster = get_roster({'H0':'g00','H1':'g11'})
    records = [FlowRecord(z,'H%i' % layout[z],5,'G') for z in sorted(layout)]
    table = ingestFlows(records,roster=roster)
    p = Partition.fromDict(layout)
    p2,flags = enforceContiguity(p,adj,table,roster=roster)
    assert p2 == p
    assert flags.islands == ['I']
    assert flags.unresolved == []

    try:
        enforceContiguity(Partition.fromDict({'g00':0,'Q':1}),adj,table,roster=roster)
        assert 1 == 0
    except RegionFlowException as rfe:
        assert rfe.code == 'coverage_mismatch'
        assert rfe.details['zones'] == ['Q']
    print('Passed.')

def test_random_grids():
    print('Testing contiguity repair on random grid partitions...')
    rng = np.random.default_rng(21)
    zones,adj = grid(4,5)
    roster = get_roster(dict([('H%02i' % i,z) for i,z in enumerate(zones)]))
    for trial in range(30):
        records = []
        for z in zones:
            for h in rng.choice(len(zones),size=3,replace=False):
                records.append(FlowRecord(z,'H%02i' % h,int(rng.integers(1,10)),'G'))
        table = ingestFlows(records,roster=roster)
        p = Partition(zones,rng.integers(0,4,size=len(zones)))
        p2,flags = enforceContiguity(p,adj,table,roster=roster)
        assert p2.getNodes() == p.getNodes()
        assert p2.getCommunityCount() <= p.getCommunityCount()
        if not flags.unresolved:
            for community in p2.getCommunities():
                assert connected(community,adj)
    print('Passed.')

def test_flags_file():
    print('Testing the baseline flags sidecar...')
    flags = BaselineFlags()
    flags.ties.extend(['C','A'])
    flags.seeds[0] = 'A'
    tdir = tempfile.mkdtemp()
    try:
        filename = os.path.join(tdir,'baseline_flags.json')
        flags.save(filename,metadata={'seed':3})
        mydict = json.load(open(filename,'rt'))
        assert mydict['ties'] == ['A','C']
        assert mydict['region_seeds'] == {'0':'A'}
        assert mydict['metadata']['seed'] == 3
    finally:
        shutil.rmtree(tdir)
    print('Passed.')

if __name__ == '__main__':
    test_adjacency()
    test_plurality()
    test_no_flow()
    test_contiguous_unchanged()
    test_enclave()
    test_flow_share()
    test_island()
    test_random_grids()
    test_flags_file()
