/** Three.js viewport: displays exactly the indexed triangle mesh returned by
 * the service (no client-side geometry interpolation), with simple pointer
 * orbit/zoom controls. */

import * as THREE from 'three';

import { MeshPayload } from './api.js';

export class Viewer {
  private readonly renderer: THREE.WebGLRenderer;
  private readonly scene: THREE.Scene;
  private readonly camera: THREE.PerspectiveCamera;
  private mesh: THREE.Mesh | undefined;
  private azimuth = 0.7;
  private elevation = 0.45;
  private distance = 4;
  private readonly target = new THREE.Vector3(0, 0.5, 0);

  constructor(private readonly canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.scene = new THREE.Scene();
    this.scene.background = new THREE.Color(0x1c1e24);
    this.camera = new THREE.PerspectiveCamera(
      45,
      canvas.clientWidth / Math.max(canvas.clientHeight, 1),
      0.01,
      100,
    );
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.45));
    const sun = new THREE.DirectionalLight(0xffffff, 1.0);
    sun.position.set(3, 5, 2);
    this.scene.add(sun);
    this.scene.add(new THREE.GridHelper(6, 12, 0x444444, 0x2a2d33));
    this.bindPointer();
    this.resize();
    window.addEventListener('resize', () => this.resize());
    this.render();
  }

  /** Swap in a new mesh payload wholesale; the previous geometry is disposed. */
  show(payload: MeshPayload): void {
    const geometry = new THREE.BufferGeometry();
    const positions = new Float32Array(payload.vertices.length * 3);
    payload.vertices.forEach((v, i) => {
      positions[3 * i] = v[0];
      positions[3 * i + 1] = v[1];
      positions[3 * i + 2] = v[2];
    });
    const index = new Uint32Array(payload.faces.length * 3);
    payload.faces.forEach((f, i) => {
      index[3 * i] = f[0];
      index[3 * i + 1] = f[1];
      index[3 * i + 2] = f[2];
    });
    geometry.setAttribute('position', new THREE.BufferAttribute(positions, 3));
    geometry.setIndex(new THREE.BufferAttribute(index, 1));
    geometry.computeVertexNormals();

    if (this.mesh) {
      this.scene.remove(this.mesh);
      this.mesh.geometry.dispose();
    }
    const material = new THREE.MeshLambertMaterial({
      color: 0x7fb2e5,
      flatShading: true,
    });
    this.mesh = new THREE.Mesh(geometry, material);
    this.scene.add(this.mesh);
    this.frame(geometry);
    this.render();
  }

  private frame(geometry: THREE.BufferGeometry): void {
    geometry.computeBoundingSphere();
    const sphere = geometry.boundingSphere;
    if (!sphere || sphere.radius <= 0) return;
    this.target.copy(sphere.center);
    this.distance = sphere.radius * 2.8;
    this.render();
  }

  private bindPointer(): void {
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    this.canvas.addEventListener('pointerdown', (e) => {
      dragging = true;
      lastX = e.clientX;
      lastY = e.clientY;
      this.canvas.setPointerCapture(e.pointerId);
    });
    this.canvas.addEventListener('pointermove', (e) => {
      if (!dragging) return;
      this.azimuth -= (e.clientX - lastX) * 0.008;
      this.elevation = Math.min(
        1.5,
        Math.max(-0.2, this.elevation + (e.clientY - lastY) * 0.006),
      );
      lastX = e.clientX;
      lastY = e.clientY;
      this.render();
    });
    this.canvas.addEventListener('pointerup', () => (dragging = false));
    this.canvas.addEventListener(
      'wheel',
      (e) => {
        e.preventDefault();
        this.distance *= Math.exp(e.deltaY * 0.001);
        this.render();
      },
      { passive: false },
    );
  }

  private resize(): void {
    const w = this.canvas.clientWidth || this.canvas.width;
    const h = this.canvas.clientHeight || this.canvas.height;
    this.renderer.setSize(w, h, false);
    this.camera.aspect = w / Math.max(h, 1);
    this.camera.updateProjectionMatrix();
    this.render();
  }

  private render(): void {
    const ce = Math.cos(this.elevation);
    this.camera.position.set(
      this.target.x + this.distance * ce * Math.cos(this.azimuth),
      this.target.y + this.distance * Math.sin(this.elevation),
      this.target.z + this.distance * ce * Math.sin(this.azimuth),
    );
    this.camera.lookAt(this.target);
    this.renderer.render(this.scene, this.camera);
  }
}
