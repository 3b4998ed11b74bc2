#!/usr/bin/env python

#stdlib imports
import os.path
import sys
import tempfile
import shutil
import json
import time

#third party imports
import numpy as np
import pandas as pd

#hack the path so that I can debug these functions if I need to
homedir = os.path.dirname(os.path.abspath(__file__)) #where is this script?
regionflowdir = os.path.abspath(os.path.join(homedir,'..'))
sys.path.insert(0,regionflowdir) #put this at the front of the system path, ignoring any installed regionflow stuff

from regionflow.dataset import RegionFlowException
from regionflow.network import FlowNetwork,buildNetwork
from regionflow.louvain import Partition,modularity,runLouvain
from regionflow.scale import (PROVENANCE_LEVEL,PROVENANCE_MERGE,cutAtLevel,cutToK,modularityCurve)
from regionflow.synth import PlantedSpec,generatePlanted

def set_partitions(n):
    labels = [0]*n
    def recurse(i,top):
        if i == n:
            yield list(labels)
            return
        for c in range(top+2):
            labels[i] = c
            for p in recurse(i+1,max(top,c)):
                yield p
    for p in recurse(1,0):
        yield p

def dense_modularity(A,labels):
    k = A.sum(axis=1)
    twom = A.sum()
    labels = np.asarray(labels)
    same = labels[:,None] == labels[None,:]
    return float(((A - np.outer(k,k)/twom)*same).sum()/twom)

def two_triangles():
    edges = [('a','b',1),('b','c',1),('a','c',1),('d','e',1),('e','f',1),('d','f',1),('c','d',1)]
    return FlowNetwork.fromEdges(edges)

def two_k4(bridge=True):
    edges = []
    for group in [['a','b','c','d'],['e','f','g','h']]:
        for i in range(4):
            for j in range(i+1,4):
                edges.append((group[i],group[j],1))
    if bridge:
        edges.append(('d','e',1))
    return FlowNetwork.fromEdges(edges)

def random_connected(rng):
    """Random connected graph on 3 to 8 nodes with real-valued weights.
    """
    n = int(rng.integers(3,9))
    A = np.zeros((n,n))
    for i in range(1,n):
        j = int(rng.integers(0,i))
        A[i,j] = A[j,i] = rng.uniform(0.5,5.0)
    for i in range(n):
        for j in range(i+1,n):
            if A[i,j] == 0 and rng.random() < 0.3:
                A[i,j] = A[j,i] = rng.uniform(0.5,5.0)
    return FlowNetwork(['n%i' % i for i in range(n)],A)

def test_cut_at_level():
    print('Testing cuts at dendrogram levels...')
    net = two_k4()
    d = runLouvain(net)
    last = cutAtLevel(d,len(d)-1)
    assert last.getCommunityCount() == 2
    assert last.sameStructure(Partition.fromDict({'a':0,'b':0,'c':0,'d':0,'e':1,'f':1,'g':1,'h':1}))
    assert cutAtLevel(d,0) == d.getZonePartition(0)
    try:
        cutAtLevel(d,99)
        assert 1 == 0
    except RegionFlowException as rfe:
        assert rfe.code == 'level_out_of_range'
    print('Passed.')

def test_cut_to_k():
    print('Testing exact-k cuts...')
    net = two_triangles()
    d = runLouvain(net)
    cut = cutToK(net,d,2)
    assert cut.provenance == PROVENANCE_LEVEL
    assert cut.level == 0
    assert cut.partition.sameStructure(Partition.fromDict({'a':0,'b':0,'c':0,'d':1,'e':1,'f':1}))
    np.testing.assert_almost_equal(cut.q,5.0/14.0)

    cut = cutToK(net,d,6)
    assert cut.partition == Partition.singletons(net.getNodes())
    assert cut.provenance == PROVENANCE_MERGE
    assert cut.level is None
    np.testing.assert_almost_equal(cut.q,modularity(net,Partition.singletons(net.getNodes())))

    cut = cutToK(net,d,1)
    assert cut.partition.getCommunityCount() == 1
    np.testing.assert_almost_equal(cut.q,0.0)

    #merging from the finest adequate level joins the bridged triangles
    cut = cutToK(net,d,3)
    assert cut.partition.getCommunityCount() == 3
    assert cut.level is None
    for k in [0,7,2.5]:
        try:
            cutToK(net,d,k)
            assert 1 == 0
        except RegionFlowException as rfe:
            assert rfe.code == 'k_out_of_range'
    print('Passed.')

def test_exactness():
    print('Testing that every k gives exactly k regions...')
    rng = np.random.default_rng(4)
    for trial in range(20):
        n = int(rng.integers(3,16))
        A = np.zeros((n,n))
        for i in range(n):
            for j in range(i+1,n):
                if rng.random() < 0.3:
                    A[i,j] = A[j,i] = rng.integers(1,6)
        A[0,1] = A[1,0] = 1
        net = FlowNetwork(['z%02i' % i for i in range(n)],A)
        d = runLouvain(net)
        for k in range(1,n+1):
            cut = cutToK(net,d,k)
            assert cut.partition.getCommunityCount() == k
            assert len(cut.partition) == n
            assert abs(cut.q - modularity(net,cut.partition)) < 1e-12
    print('Passed.')

def test_disconnected_merge():
    print('Testing merges when no connected pair is left...')
    net = two_k4(bridge=False)
    d = runLouvain(net)
    assert d.getCommunityCounts()[-1] == 2
    cut = cutToK(net,d,1)
    assert cut.provenance == PROVENANCE_MERGE
    np.testing.assert_almost_equal(cut.q,0.0)
    print('Passed.')

def test_curve():
    print('Testing the modularity curve...')
    for bridge in [True,False]:
        net = two_k4(bridge=bridge)
        d = runLouvain(net)
        curve = modularityCurve(net,d,1,8)
        assert len(curve) == 8
        assert curve.getBestK() == 2
        qs = [q for k,q in curve.getPoints()]
        assert max(qs) == curve.getCut(2).q
        for k in range(1,9):
            cut = cutToK(net,d,k)
            assert curve.getCut(k).partition == cut.partition
            assert abs(curve.getCut(k).q - cut.q) < 1e-12

    net = two_triangles()
    d = runLouvain(net)
    curve = modularityCurve(net,d,6,6)
    assert curve.getPoints() == [(6,modularity(net,Partition.singletons(net.getNodes())))]
    for kmin,kmax in [(0,3),(2,7),(4,3)]:
        try:
            modularityCurve(net,d,kmin,kmax)
            assert 1 == 0
        except RegionFlowException as rfe:
            assert rfe.code == 'k_out_of_range'
    print('Passed.')

def test_curve_levels():
    print('Testing curve values at the dendrogram level counts...')
    rng = np.random.default_rng(8)
    for trial in range(10):
        n = 24
        groups = np.repeat(np.arange(6),4)
        A = np.zeros((n,n))
        for i in range(n):
            for j in range(i+1,n):
                p = 0.8 if groups[i] == groups[j] else 0.05
                if rng.random() < p:
                    A[i,j] = A[j,i] = rng.integers(1,5)
        A[0,1] = A[1,0] = max(A[0,1],1)
        net = FlowNetwork(['z%02i' % i for i in range(n)],A)
        d = runLouvain(net)
        curve = modularityCurve(net,d,1,n)
        for level,count in enumerate(d.getCommunityCounts()):
            cut = curve.getCut(count)
            assert cut.provenance == PROVENANCE_LEVEL
            assert abs(cut.q - d.getModularity(level)) < 1e-12
            assert cut.partition == cutAtLevel(d,level)
        #merging toward k starts from the coarsest level that still has at least k communities
        counts = d.getCommunityCounts()
        for k in range(1,n+1):
            adequate = [level for level,count in enumerate(counts) if count >= k]
            expected = adequate[-1] if len(adequate) else None
            assert curve.getCut(k).level == expected
            assert cutToK(net,d,k).level == expected
        best = curve.getBestK()
        assert all([curve.getCut(best).q >= q for k,q in curve.getPoints()])
    print('Passed.')

def test_planted_curve():
    print('Testing that the curve peaks at the planted region count...')
    data = generatePlanted(PlantedSpec(regions=5,zones=10,lam=40.0,leakage=0.05,hospitals=2,seed=1))
    net = buildNetwork(data.getFlowTable(),roster=data.roster)
    d = runLouvain(net)
    curve = modularityCurve(net,d,2,15)
    assert curve.getBestK() == 5
    cut = curve.getCut(5)
    assert cut.partition.sameStructure(data.truth)
    print('Passed.')

def test_small_optimality():
    print('Testing cuts against exhaustive search on small graphs...')
    rng = np.random.default_rng(12)
    t1 = time.time()
    ntrials = 50
    within = 0
    for trial in range(ntrials):
        net = random_connected(rng)
        A = net.getMatrix().toarray()
        best = None
        bestcount = None
        for labels in set_partitions(len(net)):
            q = dense_modularity(A,labels)
            if best is None or q > best:
                best = q
                bestcount = max(labels) + 1
        d = runLouvain(net)
        cut = cutToK(net,d,bestcount)
        assert cut.partition.getCommunityCount() == bestcount
        assert cut.q <= best + 1e-12
        if cut.q >= 0.98*best - 1e-12:
            within += 1
    t2 = time.time()
    print('%i of %i cuts within 2%% of the optimum (%.2f seconds)' % (within,ntrials,t2-t1))
    #Louvain stops in local optima on a few percent of random graphs
    assert within >= 0.8*ntrials
    assert t2 - t1 < 60
    for net in [two_triangles(),two_k4()]:
        nodes = net.getNodes()
        best = max([modularity(net,Partition(nodes,labels)) for labels in set_partitions(len(nodes))])
        cut = cutToK(net,runLouvain(net),2)
        assert abs(cut.q - best) < 1e-12
    assert abs(cutToK(two_triangles(),runLouvain(two_triangles()),2).q - 5.0/14.0) < 1e-12
    print('Passed.')

def test_isolated_merge():
    print('Testing merges with a zone that has no flows...')
    edges = [('a','b',1),('b','c',1),('a','c',1),('d','e',1),('e','f',1),('d','f',1),('c','d',1)]
    net = FlowNetwork.fromEdges(edges,nodes=['a','b','c','d','e','f','g'])
    d = runLouvain(net)
    assert d.getCommunityCounts()[-1] == 3
    cut = cutToK(net,d,2)
    assert cut.provenance == PROVENANCE_MERGE
    assert abs(cut.q - 5.0/14.0) < 1e-12
    p = cut.partition
    assert p.getLabel('a') == p.getLabel('b') == p.getLabel('c')
    assert p.getLabel('d') == p.getLabel('e') == p.getLabel('f')
    assert p.getLabel('a') != p.getLabel('d')
    curve = modularityCurve(net,d,1,7)
    assert curve.getCut(2).partition == p
    assert abs(curve.getCut(2).q - cut.q) < 1e-12
    print('Passed.')

def test_curve_files():
    print('Testing curve CSV and JSON output...')
    net = two_k4()
    d = runLouvain(net)
    curve = modularityCurve(net,d,1,8)
    tdir = tempfile.mkdtemp()
    try:
        csvfile = os.path.join(tdir,'curve.csv')
        curve.save(csvfile,format='csv',comment='regionflow test')
        df = pd.read_csv(csvfile,comment='#')
        assert df.columns.tolist() == ['k','Q']
        assert df['k'].tolist() == list(range(1,9))
        jsonfile = os.path.join(tdir,'curve.json')
        curve.save(jsonfile,format='json',metadata={'seed':0})
        mydict = json.load(open(jsonfile,'rt'))
        assert mydict['best_k'] == 2
        assert len(mydict['points']) == 8
        assert mydict['metadata']['seed'] == 0
        try:
            curve.save(os.path.join(tdir,'curve.xml'),format='xml')
            assert 1 == 0
        except RegionFlowException as rfe:
            assert rfe.code == 'config'
    finally:
        shutil.rmtree(tdir)
    print('Passed.')

if __name__ == '__main__':
    test_cut_at_level()
    test_cut_to_k()
    test_exactness()
    test_disconnected_merge()
    test_curve()
    test_curve_levels()
    test_planted_curve()
    test_small_optimality()
    test_isolated_merge()
    test_curve_files()
